use crate::rng::{KeyedStream, StreamRole};

use super::CouplingError;

/// The shared randomness behind a system: the Poisson event clock, the
/// uniform ranks chosen at events and one Gaussian increment stream per rank.
///
/// Each component reads its own keyed stream, so the order in which a
/// consumer pulls from them does not matter. Cloning a bundle clones the
/// stream positions; two bundles built from the same seed are identical.
#[derive(Debug, Clone)]
pub struct DriverBundle {
    seed: u64,
    n_particles: usize,
    clock: KeyedStream,
    ranks: KeyedStream,
    increments: KeyedStream,
    silent: bool,
    mirrored: bool,
}

impl DriverBundle {
    pub fn new(seed: u64, n_particles: usize) -> Result<Self, CouplingError> {
        if n_particles == 0 {
            return Err(CouplingError::NoParticles);
        }
        Ok(Self {
            seed,
            n_particles,
            clock: KeyedStream::new(seed, StreamRole::Clock),
            ranks: KeyedStream::new(seed, StreamRole::Index),
            increments: KeyedStream::new(seed, StreamRole::Increment),
            silent: false,
            mirrored: false,
        })
    }

    /// Same clock and ranks, but every Gaussian increment is zero.
    pub fn silent(seed: u64, n_particles: usize) -> Result<Self, CouplingError> {
        let mut b = Self::new(seed, n_particles)?;
        b.silent = true;
        Ok(b)
    }

    /// The drivers of the reflected system `x -> -x`: rank `j` reads the
    /// draws of rank `N + 1 - j` and every Gaussian is negated.
    pub fn mirrored(mut self) -> Self {
        self.mirrored = !self.mirrored;
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    /// Gap to the next jump of the rate-N clock.
    pub fn next_event_gap(&mut self) -> f64 {
        self.clock.exponential(self.n_particles as f64)
    }

    /// Rank in `1..=N` duplicated at the next event.
    pub fn next_rank(&mut self) -> usize {
        let r = self.ranks.rank(self.n_particles);
        if self.mirrored {
            self.n_particles + 1 - r
        } else {
            r
        }
    }

    /// Standard normal increments for ranks `1..=N` over the next segment.
    pub fn fill_increments(&mut self, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.n_particles);
        if self.silent {
            out.fill(0.0);
        } else {
            for g in out.iter_mut() {
                *g = self.increments.normal();
            }
            if self.mirrored {
                out.reverse();
                out.iter_mut().for_each(|g| *g = -*g);
            }
        }
    }
}

/// Build the bundle for `seed`.
pub fn make_driver_bundle(seed: u64, n_particles: usize) -> Result<DriverBundle, CouplingError> {
    DriverBundle::new(seed, n_particles)
}
