//! Two-dimensional Ising model on an `L × L` torus.
//!
//! `E = −J Σ s_i s_j − h Σ s_i`, summing each right and down neighbour bond
//! once (2L² bonds). Bond and spin sums are accumulated as integers, so the
//! flip, translation and field-linearity identities hold exactly.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::numerics::{stream, Prng};
use crate::{Error, Result};

/// Largest side for which [`exhaustive_landscape`] is offered.
pub const EXHAUSTIVE_MAX_SIDE: usize = 4;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SpinLattice {
    side: usize,
    spins: Vec<i8>,
}

impl SpinLattice {
    pub fn new(side: usize, spins: Vec<i8>) -> Result<Self> {
        if side < 2 {
            return Err(Error::invalid(format!("lattice side must be >= 2, got {side}")));
        }
        if spins.len() != side * side {
            return Err(Error::invalid(format!(
                "{side}×{side} lattice needs {} spins, got {}",
                side * side,
                spins.len()
            )));
        }
        if let Some(bad) = spins.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::invalid(format!("spins must be ±1, got {bad}")));
        }
        Ok(Self { side, spins })
    }

    pub fn all_up(side: usize) -> Result<Self> {
        Self::new(side, vec![1; side * side])
    }

    /// Spin `k` (row-major) is +1 when bit `k` of `id` is set.
    pub fn from_bits(side: usize, id: u64) -> Result<Self> {
        if side * side > 64 {
            return Err(Error::invalid("bit encoding supports at most 64 spins"));
        }
        let spins = (0..side * side)
            .map(|k| if id >> k & 1 == 1 { 1 } else { -1 })
            .collect();
        Self::new(side, spins)
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn spin(&self, row: usize, col: usize) -> i8 {
        self.spins[(row % self.side) * self.side + col % self.side]
    }

    pub fn flip(&mut self, row: usize, col: usize) {
        let k = row * self.side + col;
        self.spins[k] = -self.spins[k];
    }

    /// The globally flipped configuration `−s`.
    pub fn flipped(&self) -> Self {
        Self {
            side: self.side,
            spins: self.spins.iter().map(|s| -s).collect(),
        }
    }

    /// Cyclic shift by `(dr, dc)`.
    pub fn shifted(&self, dr: usize, dc: usize) -> Self {
        let l = self.side;
        let spins = (0..l * l)
            .map(|k| self.spin(k / l + dr, k % l + dc))
            .collect();
        Self { side: l, spins }
    }

    pub fn magnetization(&self) -> i64 {
        self.spins.iter().map(|&s| i64::from(s)).sum()
    }

    /// `Σ s_i s_j` over right and down bonds with periodic wrap.
    pub fn bond_sum(&self) -> i64 {
        let l = self.side;
        let mut total = 0i64;
        for r in 0..l {
            for c in 0..l {
                let s = i64::from(self.spin(r, c));
                total += s * i64::from(self.spin(r, c + 1));
                total += s * i64::from(self.spin(r + 1, c));
            }
        }
        total
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsingParams {
    pub j: f64,
    pub h: f64,
}

impl IsingParams {
    pub fn new(j: f64, h: f64) -> Result<Self> {
        let p = Self { j, h };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.j.is_finite() || !self.h.is_finite() {
            return Err(Error::invalid(format!(
                "J and h must be finite, got J={} h={}",
                self.j, self.h
            )));
        }
        Ok(())
    }
}

pub fn energy(lattice: &SpinLattice, params: &IsingParams) -> f64 {
    -params.j * lattice.bond_sum() as f64 - params.h * lattice.magnetization() as f64
}

/// `count` independent uniform lattices; lattice `k` is drawn from its own
/// sub-stream of `prng`'s seed, so the result does not depend on how the
/// work is split.
pub fn sample_lattices(count: usize, side: usize, prng: &Prng) -> Result<Vec<SpinLattice>> {
    if count == 0 {
        return Err(Error::invalid("count must be >= 1"));
    }
    if side < 2 {
        return Err(Error::invalid(format!("lattice side must be >= 2, got {side}")));
    }
    (0..count)
        .into_par_iter()
        .map(|k| {
            let mut rng = Prng::derive(prng.seed(), &[stream::LATTICE, k as u64]);
            let spins = (0..side * side)
                .map(|_| if rng.bernoulli(0.5) { 1 } else { -1 })
                .collect();
            SpinLattice::new(side, spins)
        })
        .collect()
}

/// Samples plus their global flips: ids `0..count` are the samples and
/// `count + k` is the mirror of sample `k`.
pub fn sample_mirrored(count: usize, side: usize, prng: &Prng) -> Result<Vec<SpinLattice>> {
    let mut lattices = sample_lattices(count, side, prng)?;
    let mirrors: Vec<_> = lattices.iter().map(SpinLattice::flipped).collect();
    lattices.extend(mirrors);
    Ok(lattices)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandscapeEntry {
    pub rank: usize,
    pub energy: f64,
    pub magnetization: i64,
    pub config_id: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyLandscape {
    pub side: usize,
    pub params: IsingParams,
    /// Sorted by energy descending, ties by `config_id` ascending.
    pub entries: Vec<LandscapeEntry>,
}

impl EnergyLandscape {
    pub fn energies(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.energy).collect()
    }

    pub fn distinct_levels(&self, tol: f64) -> usize {
        crate::numerics::level_runs(&self.energies(), tol).len()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for e in &self.entries {
            w.serialize(e)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Landscape of explicit lattices; `config_id` is the position in `lattices`.
pub fn landscape_of(lattices: &[SpinLattice], params: &IsingParams) -> Result<EnergyLandscape> {
    params.validate()?;
    let side = lattices
        .first()
        .map(SpinLattice::side)
        .ok_or_else(|| Error::invalid("no lattices"))?;
    if lattices.iter().any(|l| l.side() != side) {
        return Err(Error::invalid("lattices have different sides"));
    }
    let entries = lattices
        .par_iter()
        .enumerate()
        .map(|(k, l)| LandscapeEntry {
            rank: 0,
            energy: energy(l, params),
            magnetization: l.magnetization(),
            config_id: k as u64,
        })
        .collect();
    Ok(rank(side, *params, entries))
}

fn rank(side: usize, params: IsingParams, mut entries: Vec<LandscapeEntry>) -> EnergyLandscape {
    entries.sort_by(|a, b| {
        b.energy
            .total_cmp(&a.energy)
            .then(a.config_id.cmp(&b.config_id))
    });
    for (i, e) in entries.iter_mut().enumerate() {
        e.rank = i;
    }
    EnergyLandscape {
        side,
        params,
        entries,
    }
}

pub fn energy_landscape(
    side: usize,
    count: usize,
    params: &IsingParams,
    prng: &Prng,
) -> Result<EnergyLandscape> {
    landscape_of(&sample_lattices(count, side, prng)?, params)
}

/// Every one of the `2^(L²)` configurations; `config_id` is the bit pattern
/// of [`SpinLattice::from_bits`].
pub fn exhaustive_landscape(side: usize, params: &IsingParams) -> Result<EnergyLandscape> {
    if !(2..=EXHAUSTIVE_MAX_SIDE).contains(&side) {
        return Err(Error::invalid(format!(
            "exhaustive mode supports 2 <= L <= {EXHAUSTIVE_MAX_SIDE}, got {side}"
        )));
    }
    params.validate()?;
    let total = 1u64 << (side * side);
    let entries = (0..total)
        .into_par_iter()
        .map(|id| {
            let l = SpinLattice::from_bits(side, id).expect("valid side");
            LandscapeEntry {
                rank: 0,
                energy: energy(&l, params),
                magnetization: l.magnetization(),
                config_id: id,
            }
        })
        .collect();
    Ok(rank(side, *params, entries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(j: f64, h: f64) -> IsingParams {
        IsingParams::new(j, h).unwrap()
    }

    #[test]
    fn all_up_energies() {
        let up = SpinLattice::all_up(5).unwrap();
        assert_eq!(energy(&up, &p(1.0, 0.0)), -50.0);
        assert_eq!(energy(&up, &p(1.0, 0.45)), -61.25);
        let mut one = up.clone();
        one.flip(2, 3);
        assert_eq!(energy(&one, &p(1.0, 0.0)), -42.0);
        let mut corner = up;
        corner.flip(0, 0);
        assert_eq!(energy(&corner, &p(1.0, 0.0)), -42.0);
    }

    #[test]
    fn invalid_inputs() {
        assert!(SpinLattice::new(1, vec![1]).is_err());
        assert!(SpinLattice::new(2, vec![1, 0, 1, 1]).is_err());
        assert!(IsingParams::new(f64::NAN, 0.0).is_err());
        assert!(sample_lattices(0, 5, &Prng::new(0)).is_err());
        assert!(exhaustive_landscape(5, &p(1.0, 0.0)).is_err());
    }

    #[test]
    fn sampling_is_reproducible_and_unbiased() {
        let a = sample_lattices(1, 5, &Prng::new(3)).unwrap();
        let b = sample_lattices(1, 5, &Prng::new(3)).unwrap();
        assert_eq!(a, b);
        let many = sample_lattices(1000, 5, &Prng::new(3)).unwrap();
        assert_eq!(many[0], a[0]);
        let mean: f64 =
            many.iter().map(|l| l.magnetization() as f64).sum::<f64>() / (25.0 * 1000.0);
        assert!(mean.abs() < 3.0 / (25.0f64 * 1000.0).sqrt());
    }

    #[test]
    fn mirrored_landscape_pairs_up_at_zero_field() {
        let set = sample_mirrored(1000, 5, &Prng::new(8)).unwrap();
        let zero = p(1.0, 0.0);
        let field = p(1.0, 0.45);
        for k in 0..1000 {
            let (s, m) = (&set[k], &set[1000 + k]);
            assert_eq!(energy(s, &zero), energy(m, &zero));
            let diff = energy(s, &field) - energy(m, &field);
            assert!((diff + 2.0 * 0.45 * s.magnetization() as f64).abs() < 1e-12);
            assert_eq!(diff != 0.0, s.magnetization() != 0);
        }
        let flat = landscape_of(&set, &zero).unwrap();
        let tilted = landscape_of(&set, &field).unwrap();
        assert!(tilted.distinct_levels(1e-9) >= flat.distinct_levels(1e-9));
        assert!(flat.entries.windows(2).all(|w| w[0].energy >= w[1].energy));
    }

    #[test]
    fn exhaustive_two_by_two() {
        // Each 2×2 torus bond appears twice in the right+down convention.
        let land = exhaustive_landscape(2, &p(1.0, 0.0)).unwrap();
        assert_eq!(land.entries.len(), 16);
        assert_eq!(land.entries.last().unwrap().energy, -8.0);
        assert_eq!(land.entries[0].energy, 8.0);
        let lows = land.entries.iter().filter(|e| e.energy == -8.0).count();
        assert_eq!(lows, 2);
    }

    #[test]
    fn exhaustive_three_by_three_brute_force() {
        let params = p(0.7, 0.3);
        let land = exhaustive_landscape(3, &params).unwrap();
        for e in &land.entries {
            let l = SpinLattice::from_bits(3, e.config_id).unwrap();
            let mut brute = 0.0;
            for r in 0..3 {
                for c in 0..3 {
                    let s = f64::from(l.spin(r, c));
                    for (dr, dc) in [(0, 1), (1, 0)] {
                        brute -= params.j * s * f64::from(l.spin(r + dr, c + dc));
                    }
                    brute -= params.h * s;
                }
            }
            assert!((e.energy - brute).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_columns() {
        let land = energy_landscape(3, 4, &p(1.0, 0.0), &Prng::new(1)).unwrap();
        let mut buf = Vec::new();
        land.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("rank,energy,magnetization,config_id\n"));
        assert_eq!(text.lines().count(), 5);
    }

    fn lattice() -> impl Strategy<Value = SpinLattice> {
        (2usize..7).prop_flat_map(|l| {
            proptest::collection::vec(prop_oneof![Just(1i8), Just(-1i8)], l * l)
                .prop_map(move |s| SpinLattice::new(l, s).unwrap())
        })
    }

    proptest! {
        #[test]
        fn global_flip_symmetry(l in lattice(), j in -3.0..3.0f64) {
            let params = p(j, 0.0);
            prop_assert_eq!(energy(&l, &params), energy(&l.flipped(), &params));
        }

        #[test]
        fn translation_invariance(l in lattice(), dr in 0usize..7, dc in 0usize..7, j in -3.0..3.0f64, h in -1.0..1.0f64) {
            let params = p(j, h);
            prop_assert_eq!(energy(&l, &params), energy(&l.shifted(dr, dc), &params));
        }

        #[test]
        fn field_linearity(l in lattice(), j in -3.0..3.0f64, h in -1.0..1.0f64) {
            let e0 = energy(&l, &p(j, 0.0));
            prop_assert_eq!(energy(&l, &p(j, h)), e0 - h * l.magnetization() as f64);
        }

        #[test]
        fn energy_bounds(l in lattice(), j in 0.0..3.0f64, h in 0.0..1.0f64) {
            let n = (l.side() * l.side()) as f64;
            let e = energy(&l, &p(j, h));
            prop_assert!(e >= -2.0 * j * n - h * n - 1e-12);
            prop_assert!(e <= 2.0 * j * n + h * n + 1e-12);
        }
    }
}
