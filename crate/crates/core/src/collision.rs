//! Capsule collision world with scalar and batched validation.
//!
//! Static capsules (branches plus any environment obstacles) are kept twice:
//! as plain [`Capsule`] values for reporting and as structure-of-arrays
//! bounding boxes that the batched path sweeps against a whole batch of
//! robot states at once. Both paths run the same pairwise distance test, so
//! they agree bit for bit.

use std::collections::HashSet;

use nalgebra::Isometry3;

use crate::geometry::{capsule_distance, Capsule, Vec3};
use crate::kinematics::{JointConfig, KinematicChain};

/// States evaluated together by the batched checker.
pub const BATCH: usize = 8;

// Rounding slack for box culling; keeps culling strictly conservative.
const CULL_SLACK: f64 = 1e-9;

/// A robot capsule touching (or within margin of) a static capsule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Contact {
    /// Index into the chain's capsule list.
    pub robot_capsule: usize,
    /// Link the robot capsule is attached to.
    pub link: usize,
    /// Index into the world's static capsules.
    pub static_capsule: usize,
    pub distance: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
struct BoxSoa {
    min_x: Vec<f64>,
    min_y: Vec<f64>,
    min_z: Vec<f64>,
    max_x: Vec<f64>,
    max_y: Vec<f64>,
    max_z: Vec<f64>,
}

impl BoxSoa {
    fn push(&mut self, lo: Vec3, hi: Vec3) {
        self.min_x.push(lo.x);
        self.min_y.push(lo.y);
        self.min_z.push(lo.z);
        self.max_x.push(hi.x);
        self.max_y.push(hi.y);
        self.max_z.push(hi.z);
    }

    #[inline]
    fn overlaps(&self, i: usize, lo: &Vec3, hi: &Vec3) -> bool {
        self.min_x[i] <= hi.x
            && self.max_x[i] >= lo.x
            && self.min_y[i] <= hi.y
            && self.max_y[i] >= lo.y
            && self.min_z[i] <= hi.z
            && self.max_z[i] >= lo.z
    }
}

/// Immutable collision scene. Safe to share across threads.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CollisionWorld {
    statics: Vec<Capsule>,
    boxes: BoxSoa,
    margin: f64,
    /// `(link, static capsule)` pairs allowed to touch.
    exempt: HashSet<(usize, usize)>,
}

impl CollisionWorld {
    pub fn new(statics: Vec<Capsule>) -> Self {
        Self::with_margin(statics, 0.0)
    }

    /// World whose collision threshold is `distance <= margin`.
    pub fn with_margin(statics: Vec<Capsule>, margin: f64) -> Self {
        let mut boxes = BoxSoa::default();
        let pad = Vec3::repeat(margin.max(0.0) + CULL_SLACK);
        for c in &statics {
            let (lo, hi) = c.aabb();
            boxes.push(lo - pad, hi + pad);
        }
        CollisionWorld {
            statics,
            boxes,
            margin,
            exempt: HashSet::new(),
        }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// Copy of this world that additionally lets every link in `links` touch
    /// the given static capsules.
    pub fn exempting(
        &self,
        links: impl IntoIterator<Item = usize> + Clone,
        statics: &[usize],
    ) -> Self {
        let mut w = self.clone();
        for l in links {
            for &s in statics {
                w.exempt.insert((l, s));
            }
        }
        w
    }

    pub fn statics(&self) -> &[Capsule] {
        &self.statics
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn is_exempt(&self, link: usize, static_capsule: usize) -> bool {
        !self.exempt.is_empty() && self.exempt.contains(&(link, static_capsule))
    }

    #[inline]
    fn pair_hits(&self, link: usize, s: usize, robot: &Capsule) -> Option<f64> {
        let d = capsule_distance(robot, &self.statics[s]);
        (d <= self.margin && !self.is_exempt(link, s)).then_some(d)
    }

    /// First colliding `(robot capsule, static capsule)` pair at `q`, scanning
    /// robot capsules in chain order and statics in world order.
    pub fn config_in_collision(&self, chain: &KinematicChain, q: &JointConfig) -> Option<Contact> {
        if self.statics.is_empty() {
            return None;
        }
        let frames = chain.link_frames(&q.0);
        for (k, lc) in chain.capsules().iter().enumerate() {
            let robot = lc.capsule.transformed(&frames[lc.link]);
            let (lo, hi) = robot.aabb();
            for s in 0..self.statics.len() {
                if !self.boxes.overlaps(s, &lo, &hi) {
                    continue;
                }
                if let Some(distance) = self.pair_hits(lc.link, s, &robot) {
                    return Some(Contact {
                        robot_capsule: k,
                        link: lc.link,
                        static_capsule: s,
                        distance,
                    });
                }
            }
        }
        None
    }

    pub fn in_collision(&self, chain: &KinematicChain, q: &JointConfig) -> bool {
        self.config_in_collision(chain, q).is_some()
    }

    /// Collision flags for up to [`BATCH`] states at a time; any length is
    /// accepted.
    pub fn batch_in_collision(&self, chain: &KinematicChain, states: &[JointConfig]) -> Vec<bool> {
        let mut out = Vec::with_capacity(states.len());
        let mut scratch = BatchScratch::default();
        for chunk in states.chunks(BATCH) {
            let refs: Vec<&[f64]> = chunk.iter().map(|q| q.as_slice()).collect();
            self.batch_flags(chain, &refs, &mut scratch);
            out.extend_from_slice(&scratch.hit[..chunk.len()]);
        }
        out
    }

    fn batch_flags(&self, chain: &KinematicChain, states: &[&[f64]], sc: &mut BatchScratch) {
        let nc = chain.capsules().len();
        sc.hit.clear();
        sc.hit.resize(states.len(), false);
        if self.statics.is_empty() || nc == 0 {
            return;
        }
        sc.placed.clear();
        sc.lo.clear();
        sc.hi.clear();
        sc.union_lo.clear();
        sc.union_hi.clear();
        for q in states {
            chain.link_frames_into(q, &mut sc.frames);
            let mut ulo = Vec3::repeat(f64::INFINITY);
            let mut uhi = Vec3::repeat(f64::NEG_INFINITY);
            for lc in chain.capsules() {
                let c = lc.capsule.transformed(&sc.frames[lc.link]);
                let (lo, hi) = c.aabb();
                ulo = ulo.inf(&lo);
                uhi = uhi.sup(&hi);
                sc.placed.push(c);
                sc.lo.push(lo);
                sc.hi.push(hi);
            }
            sc.union_lo.push(ulo);
            sc.union_hi.push(uhi);
        }
        let links: Vec<usize> = chain.capsules().iter().map(|c| c.link).collect();
        for s in 0..self.statics.len() {
            for b in 0..states.len() {
                if sc.hit[b] || !self.boxes.overlaps(s, &sc.union_lo[b], &sc.union_hi[b]) {
                    continue;
                }
                for (k, &link) in links.iter().enumerate() {
                    let idx = b * nc + k;
                    if self.boxes.overlaps(s, &sc.lo[idx], &sc.hi[idx])
                        && self.pair_hits(link, s, &sc.placed[idx]).is_some()
                    {
                        sc.hit[b] = true;
                        break;
                    }
                }
            }
        }
    }

    /// Whether the straight joint-space segment between `from` and `to` is
    /// collision-free at every interpolated state (L-infinity spacing at most
    /// `resolution`, endpoints included). States are checked in batches,
    /// coarse to fine, stopping at the first hit.
    pub fn edge_valid(
        &self,
        chain: &KinematicChain,
        from: &JointConfig,
        to: &JointConfig,
        resolution: f64,
    ) -> bool {
        assert!(resolution > 0.0, "edge resolution must be positive");
        let (a, b) = canonical_pair(from, to);
        let n = segment_count(a, b, resolution);
        if self.statics.is_empty() {
            return true;
        }
        let order = bisection_order(n);
        let mut scratch = BatchScratch::default();
        let mut buf: Vec<Vec<f64>> = vec![vec![0.0; a.len()]; BATCH];
        for chunk in order.chunks(BATCH) {
            for (slot, &i) in buf.iter_mut().zip(chunk) {
                interpolate_into(a, b, i, n, slot);
            }
            let refs: Vec<&[f64]> = buf[..chunk.len()].iter().map(|v| v.as_slice()).collect();
            self.batch_flags(chain, &refs, &mut scratch);
            if scratch.hit.iter().any(|&h| h) {
                return false;
            }
        }
        true
    }

    /// Reference implementation of [`Self::edge_valid`]: one state at a
    /// time, in order, through the scalar checker.
    pub fn edge_valid_scalar(
        &self,
        chain: &KinematicChain,
        from: &JointConfig,
        to: &JointConfig,
        resolution: f64,
    ) -> bool {
        assert!(resolution > 0.0, "edge resolution must be positive");
        let (a, b) = canonical_pair(from, to);
        let n = segment_count(a, b, resolution);
        let mut q = JointConfig(vec![0.0; a.len()]);
        (0..=n).all(|i| {
            interpolate_into(a, b, i, n, &mut q.0);
            !self.in_collision(chain, &q)
        })
    }
}

#[derive(Default)]
struct BatchScratch {
    frames: Vec<Isometry3<f64>>,
    placed: Vec<Capsule>,
    lo: Vec<Vec3>,
    hi: Vec<Vec3>,
    union_lo: Vec<Vec3>,
    union_hi: Vec<Vec3>,
    hit: Vec<bool>,
}

/// Orders the endpoints so that validating `a -> b` and `b -> a` visits the
/// very same floating-point states.
fn canonical_pair<'a>(x: &'a JointConfig, y: &'a JointConfig) -> (&'a [f64], &'a [f64]) {
    let swap =
        x.0.iter()
            .zip(&y.0)
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| o.is_ne())
            .is_some_and(|o| o.is_gt());
    if swap {
        (&y.0, &x.0)
    } else {
        (&x.0, &y.0)
    }
}

/// Number of intervals so that consecutive states differ by at most
/// `resolution` in every joint.
pub fn segment_count(a: &[f64], b: &[f64], resolution: f64) -> usize {
    let span = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    (span / resolution).ceil() as usize
}

#[inline]
fn interpolate_into(a: &[f64], b: &[f64], i: usize, n: usize, out: &mut [f64]) {
    if n == 0 {
        out.copy_from_slice(a);
        return;
    }
    let t = i as f64 / n as f64;
    for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
        *o = x + (y - x) * t;
    }
}

/// State indices `0..=n`: both endpoints, then interval midpoints level by
/// level.
fn bisection_order(n: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(0);
    if n == 0 {
        return out;
    }
    out.push(n);
    let mut intervals = vec![(0usize, n)];
    while !intervals.is_empty() {
        let mut next = Vec::with_capacity(intervals.len() * 2);
        for (lo, hi) in intervals {
            if hi - lo < 2 {
                continue;
            }
            let mid = lo + (hi - lo) / 2;
            out.push(mid);
            next.push((lo, mid));
            next.push((mid, hi));
        }
        intervals = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::default_chain;

    #[test]
    fn bisection_covers_every_state_once() {
        for n in 0..40 {
            let mut o = bisection_order(n);
            o.sort_unstable();
            assert_eq!(o, (0..=n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn empty_world_never_collides() {
        let c = default_chain();
        let w = CollisionWorld::empty();
        let mut r = crate::rng::stream(1, &[]);
        for _ in 0..50 {
            let q = c.random_config(&mut r);
            assert!(w.config_in_collision(&c, &q).is_none());
        }
        assert!(w.edge_valid(&c, &c.home(), &c.midpoint(), 0.02));
    }

    #[test]
    fn capsule_around_end_effector_collides() {
        let c = default_chain();
        let q = c.home();
        let p = c.forward_kinematics(&q).unwrap().translation;
        let w = CollisionWorld::new(vec![Capsule::new(p, p + Vec3::new(0.0, 0.0, 0.01), 0.05)]);
        let hit = w.config_in_collision(&c, &q).unwrap();
        assert_eq!(hit.static_capsule, 0);
        assert_eq!(hit.link, 7);
        assert!(!w.edge_valid(&c, &q, &q, 0.02));
        // exempting the tool link for that capsule clears it
        let relaxed = w.exempting(std::iter::once(7), &[0]);
        assert!(relaxed.config_in_collision(&c, &q).is_none());
    }

    #[test]
    fn margin_inflates_threshold() {
        let c = default_chain();
        let q = c.home();
        let p = c.forward_kinematics(&q).unwrap().translation;
        // a sphere 5 cm beyond the tool capsule surface along +x
        let s = Capsule::new(
            p + Vec3::new(0.3, 0.0, 0.0),
            p + Vec3::new(0.3, 0.0, 0.0),
            0.01,
        );
        let d = w_dist(&c, &q, &s);
        assert!(d > 0.0);
        assert!(CollisionWorld::new(vec![s])
            .config_in_collision(&c, &q)
            .is_none());
        assert!(CollisionWorld::with_margin(vec![s], d + 1e-6)
            .config_in_collision(&c, &q)
            .is_some());
    }

    fn w_dist(c: &KinematicChain, q: &JointConfig, s: &Capsule) -> f64 {
        let frames = c.link_frames(&q.0);
        c.capsules()
            .iter()
            .map(|lc| capsule_distance(&lc.capsule.transformed(&frames[lc.link]), s))
            .fold(f64::INFINITY, f64::min)
    }
}
