//! Census of periodic orbits of `φ` on the `k`-fold fiberwise cover, per free-homotopy class.

use std::collections::BTreeSet;

use crate::action::{CircleAction, CirclePoint, FixedKind};
use crate::error::{LabError, Result};
use crate::flow::periodic::periodic_orbit_power;
use crate::flow::FlowEngine;
use crate::geometry::{classify_and_fixed_points, IsometryClass};
use crate::group::{conjugacy_key, ConjugacyKey, Word};

pub const MAX_CENSUS_WORD_LEN: usize = 6;
pub const MAX_CENSUS_COVER: u32 = 8;

/// Largest accepted closure gap and period error.
pub const CENSUS_TOL: f64 = 1e-7;

#[derive(Clone, Debug)]
pub struct CensusOrbit {
    pub point: CirclePoint,
    pub kind: FixedKind,
    pub period: f64,
    /// Class of the orbit, read from its crossing word.
    pub class: ConjugacyKey,
    pub respelled: bool,
    pub closure_gap: f64,
}

#[derive(Clone, Debug)]
pub struct CensusEntry {
    pub key: ConjugacyKey,
    pub k: u32,
    /// Smallest `j` with `k | j·n`, `n` the rotation displacement of the key.
    pub exponent: u32,
    pub displacement: i64,
    /// Whether the free-group action on `R/kZ` factors through the surface group.
    pub descends: bool,
    pub translation_length: f64,
    /// All orbits from fixed points of `ρ_k(w^j)`, sorted by fiber coordinate.
    pub orbits: Vec<CensusOrbit>,
}

impl CensusEntry {
    pub fn count(&self) -> usize {
        self.orbits.len()
    }

    /// Orbits in the class of `w^j`.
    pub fn class_count(&self) -> usize {
        let key = conjugacy_key(&self.key.word().pow(self.exponent));
        self.orbits.iter().filter(|o| o.class == key).count()
    }

    /// Orbits in the class of `w^{-j}`.
    pub fn inverse_count(&self) -> usize {
        let key = conjugacy_key(&self.key.word().pow(self.exponent).inverse());
        self.orbits.iter().filter(|o| o.class == key).count()
    }

    /// Fixed-point kinds alternate around the circle.
    pub fn alternates(&self) -> bool {
        let n = self.orbits.len();
        n.is_multiple_of(2) && (0..n).all(|i| self.orbits[i].kind != self.orbits[(i + 1) % n].kind)
    }

    /// Largest `|period - j·ℓ|`.
    pub fn period_error(&self) -> f64 {
        let expected = self.exponent as f64 * self.translation_length;
        self.orbits
            .iter()
            .map(|o| (o.period - expected).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_closure_gap(&self) -> f64 {
        self.orbits
            .iter()
            .map(|o| o.closure_gap)
            .fold(0.0, f64::max)
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Smallest `j ≥ 1` with `k | j·n`.
pub fn cover_exponent(k: u32, displacement: i64) -> u32 {
    (k as u64 / gcd(displacement.unsigned_abs(), k as u64)) as u32
}

/// Conjugacy classes of nonempty cyclically reduced words up to `max_len`, by length then word.
pub fn conjugacy_classes(action: &CircleAction, max_len: usize) -> Result<Vec<ConjugacyKey>> {
    let mut keys = BTreeSet::new();
    for w in action.group().enumerate_words(max_len)? {
        if !w.is_empty() && w.is_cyclically_reduced() {
            let key = conjugacy_key(&w);
            keys.insert((key.word().len(), key));
        }
    }
    Ok(keys.into_iter().map(|(_, k)| k).collect())
}

/// Census of one class on the `k`-fold cover.
pub fn census_entry(engine: &FlowEngine<'_>, key: &ConjugacyKey) -> Result<CensusEntry> {
    let action = engine.action();
    let k = action.k();
    let w: &Word = key.word();
    let c = classify_and_fixed_points(&action.group().evaluate(w));
    if c.class != IsometryClass::Hyperbolic {
        return Err(LabError::NotHyperbolic {
            word: w.to_string(),
        });
    }
    let n = action.rotation_displacement(w);
    let j = cover_exponent(k, n);
    let power = w.pow(j);
    let mut orbits = Vec::new();
    for fp in action.fixed_points(&power)? {
        let orbit = periodic_orbit_power(engine, w, j, fp.point, None)?;
        orbits.push(CensusOrbit {
            point: orbit.p,
            kind: fp.kind,
            period: orbit.period,
            class: orbit.class,
            respelled: orbit.respelled,
            closure_gap: orbit.closure_gap,
        });
    }
    Ok(CensusEntry {
        key: key.clone(),
        k,
        exponent: j,
        displacement: n,
        descends: action.descends_to_surface_group(),
        translation_length: c.translation_length,
        orbits,
    })
}

/// One entry per conjugacy class of cyclically reduced words up to `max_word_len`.
pub fn orbit_census(action: &CircleAction, max_word_len: usize) -> Result<Vec<CensusEntry>> {
    if max_word_len > MAX_CENSUS_WORD_LEN {
        return Err(LabError::Budget(format!(
            "census word length {max_word_len} exceeds {MAX_CENSUS_WORD_LEN}"
        )));
    }
    if action.k() > MAX_CENSUS_COVER {
        return Err(LabError::Budget(format!(
            "census cover k = {} exceeds {MAX_CENSUS_COVER}",
            action.k()
        )));
    }
    let engine = FlowEngine::new(action);
    conjugacy_classes(action, max_word_len)?
        .iter()
        .map(|key| census_entry(&engine, key))
        .collect()
}

/// Two orbits from consecutive fixed points of one class.
#[derive(Clone, Debug)]
pub struct InversePair {
    pub key: ConjugacyKey,
    pub k: u32,
    pub first: CirclePoint,
    pub second: CirclePoint,
    /// The two orbits lie in mutually inverse classes.
    pub inverse: bool,
}

/// Pairs consecutive fixed points `(0, 1), (2, 3), ...` of every entry.
pub fn homotopic_inverse_pairs(census: &[CensusEntry]) -> Vec<InversePair> {
    let mut out = Vec::new();
    for e in census {
        for pair in e.orbits.chunks_exact(2) {
            out.push(InversePair {
                key: e.key.clone(),
                k: e.k,
                first: pair[0].point,
                second: pair[1].point,
                inverse: pair[0].class.inverse() == pair[1].class,
            });
        }
    }
    out
}

/// `count(k) = k·count(1)` for every class present in both censuses.
#[derive(Clone, Debug)]
pub struct ScalingRow {
    pub key: ConjugacyKey,
    pub k: u32,
    pub base_count: usize,
    pub count: usize,
    pub holds: bool,
}

pub fn scaling_rows(base: &[CensusEntry], cover: &[CensusEntry]) -> Vec<ScalingRow> {
    cover
        .iter()
        .filter_map(|e| {
            let b = base.iter().find(|b| b.key == e.key)?;
            Some(ScalingRow {
                key: e.key.clone(),
                k: e.k,
                base_count: b.count(),
                count: e.count(),
                holds: e.count() == e.k as usize * b.count(),
            })
        })
        .collect()
}
