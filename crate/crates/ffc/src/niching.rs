//! Crowding clustering: split a population into niches of similar programs.
//!
//! A fresh random reference program is drawn, the unclustered program closest
//! to it (Hamming distance over decoded genes) seeds a niche, and the niche is
//! filled with the programs closest to that seed. Ties always break toward the
//! lowest population index, so the assignment is deterministic under a seed.

use rand::Rng;

use crate::error::Error;
use crate::genome::{decode, hamming_unchecked, DecodedProgram, ProgramShape};
use crate::Result;

/// A disjoint covering of population indices by niche.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NicheAssignment {
    /// Member indices per niche. Each list starts with the niche's seed
    /// program, followed by the members in (distance, index) order.
    pub niches: Vec<Vec<usize>>,
    /// The random reference program the first seed was matched against.
    pub reference: DecodedProgram,
}

/// Number of niches for population size `population` and niche size `ns`:
/// `ceil(population / ns)`.
pub fn niche_count(population: usize, ns: usize) -> Result<usize> {
    if population < 1 {
        return Err(Error::InvalidArgument("population must be non-empty".into()));
    }
    if ns < 1 || ns > population {
        return Err(Error::InvalidArgument(format!(
            "niche size {ns} out of range [1, {population}]"
        )));
    }
    Ok(population.div_ceil(ns))
}

/// Cluster a population of decoded programs into niches of size `ns` (the
/// last niche takes the remainder).
pub fn crowding_cluster(
    population: &[DecodedProgram],
    ns: usize,
    shape: &ProgramShape,
    rng: &mut impl Rng,
) -> Result<NicheAssignment> {
    let total = population.len();
    let n_niches = niche_count(total, ns)?;
    for dp in population {
        if dp.mask.len() != shape.n_features()
            || dp.op_genes.len() != shape.internal_slots()
            || dp.link_genes.len() != shape.link_slots()
        {
            return Err(Error::LengthMismatch {
                expected: shape.dimension(),
                got: dp.len(),
            });
        }
    }

    let reference = decode(&shape.random_position(rng), shape)?;

    let mut unclustered: Vec<usize> = (0..total).collect();
    let mut niches = Vec::with_capacity(n_niches);
    while !unclustered.is_empty() {
        let size = ns.min(unclustered.len());

        // Seed: unclustered program closest to the reference.
        let seed_slot = nearest(&unclustered, |i| {
            hamming_unchecked(&population[i], &reference)
        });
        let seed = unclustered.swap_remove(seed_slot);

        // Fill: the size-1 unclustered programs closest to the seed.
        unclustered.sort_by_key(|&i| (hamming_unchecked(&population[i], &population[seed]), i));
        let mut members = vec![seed];
        members.extend(unclustered.drain(..size - 1));
        niches.push(members);
    }

    debug_assert_eq!(niches.len(), n_niches);
    Ok(NicheAssignment { niches, reference })
}

/// Position of the minimizing candidate, ties toward the lowest index value.
fn nearest(candidates: &[usize], dist: impl Fn(usize) -> usize) -> usize {
    let mut best_slot = 0;
    let mut best_key = (usize::MAX, usize::MAX);
    for (slot, &i) in candidates.iter().enumerate() {
        let key = (dist(i), i);
        if key < best_key {
            best_key = key;
            best_slot = slot;
        }
    }
    best_slot
}
