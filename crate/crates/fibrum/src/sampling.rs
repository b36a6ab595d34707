//! Seeded random draws inside chart boxes.

use fibrum_core::catalog::{BoundedMap, SmoothMap};
use fibrum_core::connection::BoxDomain;
use fibrum_core::{Point, Result, TrivializedBundle};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Fraction of each box side kept clear of samples.
pub const MARGIN: f64 = 0.1;

/// Uniform samples from boxes shrunk by [`MARGIN`], plus random smooth maps.
#[derive(Debug, Clone)]
pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Sampler { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// A uniform draw from `[−1, 1)`.
    pub fn unit(&mut self) -> f64 {
        self.rng.random_range(-1.0..1.0)
    }

    pub fn vector(&mut self, n: usize, scale: f64) -> Vec<f64> {
        (0..n).map(|_| scale * self.unit()).collect()
    }

    pub fn in_box(&mut self, b: &BoxDomain) -> Vec<f64> {
        let inner = b.shrunk(MARGIN);
        inner.lo().iter().zip(inner.hi()).map(|(&l, &h)| self.rng.random_range(l..h)).collect()
    }

    pub fn base_point(&mut self, bundle: &TrivializedBundle) -> Result<Point> {
        let x = self.in_box(bundle.base_box());
        bundle.base_point(&x)
    }

    pub fn total_point(&mut self, bundle: &TrivializedBundle) -> Result<Point> {
        let x = self.in_box(bundle.base_box());
        let y = self.in_box(bundle.fibre_box());
        bundle.total_point(&x, &y)
    }

    /// A random section whose values stay inside the shrunk fibre box.
    pub fn section(&mut self, bundle: &TrivializedBundle) -> BoundedMap {
        let target = bundle.fibre_box().shrunk(MARGIN);
        BoundedMap::new(&target, bundle.base_dim(), || self.rng.random_range(-1.0..1.0))
    }

    /// A random smooth map `Rⁿ → Rᵏ`.
    pub fn smooth_map(&mut self, n_in: usize, n_out: usize) -> SmoothMap {
        SmoothMap::from_draws(n_in, n_out, || self.rng.random_range(-1.0..1.0))
    }

    /// A random vector field on the base.
    pub fn base_field(&mut self, bundle: &TrivializedBundle) -> SmoothMap {
        self.smooth_map(bundle.base_dim(), bundle.base_dim())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use fibrum_core::catalog::SphereConnection;
    use fibrum_core::{Connection, VectorMap};

    #[test]
    fn same_seed_same_draws() {
        let mut a = Sampler::new(9);
        let mut b = Sampler::new(9);
        assert_eq!(a.vector(5, 1.0), b.vector(5, 1.0));
        assert_ne!(Sampler::new(10).vector(5, 1.0), Sampler::new(9).vector(5, 1.0));
    }

    #[test]
    fn points_and_sections_stay_inside_the_shrunk_boxes() {
        let conn = SphereConnection::default();
        let b = conn.bundle();
        let mut s = Sampler::new(1);
        let inner_base = b.base_box().shrunk(MARGIN);
        let inner_fibre = b.fibre_box().shrunk(MARGIN);
        for _ in 0..200 {
            let e = s.total_point(b).unwrap();
            assert!(inner_base.contains(e.base()) || e.base().iter().zip(inner_base.lo()).any(|(a, l)| a == l));
            let sec = s.section(b);
            let x = s.base_point(b).unwrap();
            assert!(inner_fibre.contains(&sec.eval(x.coords())));
        }
    }
}
