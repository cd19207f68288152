//! Critical-length arithmetic for the linearized boundary-control problem.
//!
//! For a drift constant `c > -1` the linearization around `c` loses exact
//! controllability precisely on the set
//!
//! ```text
//! R_c = { 2π sqrt(m² + m l + l²) / sqrt(3 (c + 1)) : m, l ≥ 1 }
//!     ∪ { m π / sqrt(c + 1)                        : m ≥ 1 }.
//! ```
//!
//! Every member of either branch can be written `π sqrt(K / (3 (c + 1)))`
//! with the integer key `K = 4 (m² + m l + l²)` (two-index branch) or
//! `K = 3 m²` (one-index branch), so enumeration, sorting and cross-branch
//! merging are exact integer operations; floating point only enters when the
//! key is converted to a length.

use thiserror::Error;

use std::collections::BTreeMap;
use std::f64::consts::PI;

/// Default tolerance for the membership tests, applied in the integer-key
/// domain (see [`is_critical`]).
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Error)]
pub enum CriticalError {
    #[error("drift c = {c} is outside the admissible range (require c > -1)")]
    Domain { c: f64 },
    #[error("length L = {length} must be positive and finite")]
    InvalidLength { length: f64 },
    #[error("cutoff l_max = {l_max} must be positive and finite")]
    InvalidCutoff { l_max: f64 },
    #[error("tolerance {tol} must be non-negative")]
    InvalidTolerance { tol: f64 },
    #[error("L = {length} is not a critical length for c = {c}")]
    NotCritical { length: f64, c: f64 },
    #[error("preference {preference} must lie strictly inside (0, 1)")]
    InvalidPreference { preference: f64 },
}

/// Which closed-form branch of `R_c` a generator belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    TwoIndex,
    OneIndex,
}

/// One witnessing pair `(m, l)` (two-index) or index `m` (one-index, `l` is 0
/// and unused). Two-index generators are kept canonical with `m ≤ l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CriticalGenerator {
    pub branch: Branch,
    pub m: u64,
    pub l: u64,
}

impl CriticalGenerator {
    pub fn two_index(m: u64, l: u64) -> Self {
        Self { branch: Branch::TwoIndex, m: m.min(l), l: m.max(l) }
    }

    pub fn one_index(m: u64) -> Self {
        Self { branch: Branch::OneIndex, m, l: 0 }
    }

    /// Integer sort/merge key: the generated length is `π sqrt(key / (3(c+1)))`.
    pub(crate) fn key(&self) -> u64 {
        match self.branch {
            Branch::TwoIndex => 4 * (self.m * self.m + self.m * self.l + self.l * self.l),
            Branch::OneIndex => 3 * self.m * self.m,
        }
    }

    /// The critical length this generator produces for drift `c`.
    pub fn value(&self, c: f64) -> f64 {
        PI * (self.key() as f64 / (3.0 * (c + 1.0))).sqrt()
    }
}

/// One element of `R_c` together with every generator that produces it.
#[derive(Debug, Clone)]
pub struct CriticalMember {
    pub length: f64,
    pub generators: Vec<CriticalGenerator>,
}

/// All critical lengths up to a cutoff, strictly increasing, with coinciding
/// branch values merged into a single member.
#[derive(Debug, Clone)]
pub struct CriticalSet {
    pub c: f64,
    pub l_max: f64,
    pub members: Vec<CriticalMember>,
}

/// Which case of the drift-perturbation argument applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbationCase {
    TwoIndexCase,
    OneIndexCase,
}

/// Separation bound and exact safe radius around a critical drift.
///
/// For a critical `L` the set of drifts `d` with `L ∈ R_d` is discrete; `c`
/// itself belongs to it. `separation` is the proven lower bound on pairwise
/// gaps of that set and `epsilon_c` is the exact distance from `c` to its
/// nearest other element, so every `d ≠ c` with `|d − c| < epsilon_c` (and
/// `d ≠ -1`) satisfies `L ∉ R_d`.
#[derive(Debug, Clone)]
pub struct PerturbationAnalysis {
    pub c: f64,
    pub length: f64,
    pub case: PerturbationCase,
    pub base_generator: CriticalGenerator,
    pub separation: f64,
    pub epsilon_c: f64,
}

fn check_drift(c: f64) -> Result<(), CriticalError> {
    if !(c > -1.0) || !c.is_finite() {
        return Err(CriticalError::Domain { c });
    }
    Ok(())
}

fn check_length(length: f64) -> Result<(), CriticalError> {
    if !(length > 0.0) || !length.is_finite() {
        return Err(CriticalError::InvalidLength { length });
    }
    Ok(())
}

/// Canonical decomposition `n = m² + m l + l²` with `1 ≤ m ≤ l`, if one exists.
fn two_index_decomposition(n: u64) -> Option<(u64, u64)> {
    let mut m = 1u64;
    while m * m + m + 1 <= n {
        // Solve l² + m l + (m² − n) = 0 for a positive integer l ≥ m.
        let disc = 4 * n - 3 * m * m;
        let root = disc.isqrt();
        if root * root == disc && (root + m) % 2 == 0 {
            let l = (root - m) / 2;
            if l >= m && m * m + m * l + l * l == n {
                return Some((m, l));
            }
        }
        m += 1;
    }
    None
}

fn perfect_square_root(n: u64) -> Option<u64> {
    let r = n.isqrt();
    (r * r == n && r >= 1).then_some(r)
}

/// Enumerates `R_c ∩ (0, l_max]`, merging branch coincidences exactly.
pub fn enumerate_critical(c: f64, l_max: f64) -> Result<CriticalSet, CriticalError> {
    check_drift(c)?;
    if !(l_max > 0.0) || !l_max.is_finite() {
        return Err(CriticalError::InvalidCutoff { l_max });
    }

    // value ≤ l_max  ⇔  key ≤ 3 (c+1) l_max² / π²
    let key_cap = 3.0 * (c + 1.0) * l_max * l_max / (PI * PI);
    let mut by_key: BTreeMap<u64, Vec<CriticalGenerator>> = BTreeMap::new();

    let mut m = 1u64;
    while (4 * (3 * m * m)) as f64 <= key_cap {
        let mut l = m;
        loop {
            let gen = CriticalGenerator::two_index(m, l);
            if (gen.key() as f64) > key_cap {
                break;
            }
            by_key.entry(gen.key()).or_default().push(gen);
            l += 1;
        }
        m += 1;
    }

    let mut m = 1u64;
    while (3 * m * m) as f64 <= key_cap {
        let gen = CriticalGenerator::one_index(m);
        by_key.entry(gen.key()).or_default().push(gen);
        m += 1;
    }

    let scale = PI / (3.0 * (c + 1.0)).sqrt();
    let members = by_key
        .into_iter()
        .map(|(key, generators)| CriticalMember { length: scale * (key as f64).sqrt(), generators })
        .filter(|m| m.length <= l_max)
        .collect();

    Ok(CriticalSet { c, l_max, members })
}

/// Membership test with an exact-form witness.
///
/// The two-index branch holds iff `3 (c+1) L² / (4π²)` is within `tol` of an
/// integer representable as `m² + m l + l²`; the one-index branch holds iff
/// `(c+1) L² / π²` is within `tol` of a perfect square. The two-index witness
/// is preferred when both match.
pub fn is_critical(length: f64, c: f64, tol: f64) -> Result<Option<CriticalGenerator>, CriticalError> {
    check_length(length)?;
    check_drift(c)?;
    if !(tol >= 0.0) || !tol.is_finite() {
        return Err(CriticalError::InvalidTolerance { tol });
    }

    let q2 = 3.0 * (c + 1.0) * length * length / (4.0 * PI * PI);
    let n2 = q2.round();
    if n2 >= 3.0 && (q2 - n2).abs() <= tol {
        if let Some((m, l)) = two_index_decomposition(n2 as u64) {
            return Ok(Some(CriticalGenerator::two_index(m, l)));
        }
    }

    let q1 = (c + 1.0) * length * length / (PI * PI);
    let n1 = q1.round();
    if n1 >= 1.0 && (q1 - n1).abs() <= tol {
        if let Some(m) = perfect_square_root(n1 as u64) {
            return Ok(Some(CriticalGenerator::one_index(m)));
        }
    }

    Ok(None)
}

/// The drifts `d` with `L ∈ R_d`, written `d = (c+1)·(num/den) − 1`. For a
/// two-index base `L = 2π sqrt(Q) / sqrt(3(c+1))` with `Q = j² + jk + k²`:
/// `L ∈ R_d` via the two-index branch forces `d = (c+1) P / Q − 1` and via the
/// one-index branch `d = 3 p² (c+1) / (4 Q) − 1`. For a one-index base
/// `L = k π / sqrt(c+1)`: the two-index branch gives `d = 4 P (c+1) / (3k²) − 1`
/// and the one-index branch `d = m² (c+1) / k² − 1`. Both families of one case
/// share the denominator `4Q` resp. `3k²`, so elements are compared by the
/// integer numerator.
struct BadDriftFamily {
    /// Common denominator of the rational factor.
    den: u64,
    /// Numerator of the base element (the one equal to `c`).
    base_num: u64,
}

impl BadDriftFamily {
    fn element(&self, c: f64, num: u64) -> f64 {
        (c + 1.0) * num as f64 / self.den as f64 - 1.0
    }
}

fn family_for(case: PerturbationCase, base: &CriticalGenerator) -> BadDriftFamily {
    match case {
        // Denominator 4Q: two-index numerators 4P, one-index numerators 3p².
        PerturbationCase::TwoIndexCase => {
            let q = base.m * base.m + base.m * base.l + base.l * base.l;
            BadDriftFamily { den: 4 * q, base_num: 4 * q }
        }
        // Denominator 3k²: two-index numerators 4P, one-index numerators 3m².
        PerturbationCase::OneIndexCase => {
            let k = base.m;
            BadDriftFamily { den: 3 * k * k, base_num: 3 * k * k }
        }
    }
}

/// All numerators of bad-drift elements with indices up to `index_cap`
/// (two-index pairs `m, l ≤ index_cap`, one-index `m ≤ index_cap`), deduped.
/// Both cases share the same numerator families, only the denominator and
/// base differ.
fn bad_drift_numerators(index_cap: u64) -> Vec<u64> {
    let mut nums = std::collections::BTreeSet::new();
    for m in 1..=index_cap {
        for l in m..=index_cap {
            nums.insert(4 * (m * m + m * l + l * l));
        }
        nums.insert(3 * m * m);
    }
    nums.into_iter().collect()
}

/// Distinct elements of the bad-drift set for the case witnessing `L`,
/// restricted to generator indices `≤ index_cap`, sorted increasing.
pub fn perturbation_elements(length: f64, c: f64, index_cap: u64) -> Result<Vec<f64>, CriticalError> {
    let analysis = perturbation_analysis(length, c)?;
    let family = family_for(analysis.case, &analysis.base_generator);
    Ok(bad_drift_numerators(index_cap)
        .into_iter()
        .map(|num| family.element(c, num))
        .collect())
}

/// Nearest-other-element distance from `c` in the bad-drift set, exact up to
/// one floating multiplication.
fn exact_epsilon(c: f64, family: &BadDriftFamily) -> f64 {
    let base = family.base_num;
    let mut best: Option<u64> = None;
    let mut consider = |num: u64| {
        if num != base {
            let gap = num.abs_diff(base);
            best = Some(best.map_or(gap, |b: u64| b.min(gap)));
        }
    };

    // Two-index numerators 4P with P representable: scan outward from the
    // base numerator; representable integers have gaps O(sqrt), so a bounded
    // outward scan always terminates quickly.
    let p_center = base / 4;
    let mut found_above = false;
    let mut found_below = p_center <= 3;
    let mut offset = 1u64;
    while !(found_above && found_below) {
        if !found_above {
            if two_index_decomposition(p_center + offset).is_some() {
                consider(4 * (p_center + offset));
                found_above = true;
            }
        }
        if !found_below {
            if p_center > offset + 2 {
                let p = p_center - offset;
                if p >= 3 && two_index_decomposition(p).is_some() {
                    consider(4 * p);
                    found_below = true;
                }
            } else {
                found_below = true;
            }
        }
        offset += 1;
    }
    if p_center >= 3 && two_index_decomposition(p_center).is_some() && 4 * p_center != base {
        consider(4 * p_center);
    }

    // One-index numerators: 3p² (two-index case) or 3m² (one-index case) —
    // identical form either way; scan the few squares bracketing the base.
    let root = ((base as f64) / 3.0).sqrt();
    let lo = (root.floor() as u64).saturating_sub(1).max(1);
    for p in lo..=(root.ceil() as u64 + 1) {
        consider(3 * p * p);
    }

    (c + 1.0) * best.expect("bad-drift sets always have a nearest element") as f64
        / family.den as f64
}

/// Separation bound and exact safe radius for a critical `(L, c)` pair.
pub fn perturbation_analysis(length: f64, c: f64) -> Result<PerturbationAnalysis, CriticalError> {
    let witness = is_critical(length, c, DEFAULT_TOL)?
        .ok_or(CriticalError::NotCritical { length, c })?;

    let (case, separation) = match witness.branch {
        Branch::TwoIndex => {
            let q = witness.m * witness.m + witness.m * witness.l + witness.l * witness.l;
            (PerturbationCase::TwoIndexCase, (c + 1.0) / (4.0 * q as f64))
        }
        Branch::OneIndex => {
            let k = witness.m;
            (PerturbationCase::OneIndexCase, (c + 1.0) / (3.0 * (k * k) as f64))
        }
    };

    let family = family_for(case, &witness);
    let epsilon_c = exact_epsilon(c, &family);

    Ok(PerturbationAnalysis {
        c,
        length,
        case,
        base_generator: witness,
        separation,
        epsilon_c,
    })
}

/// Picks the concrete non-critical drift `d = c + preference · epsilon_c`
/// inside the punctured safe interval, `preference ∈ (0, 1)`.
pub fn safe_drift(length: f64, c: f64, preference: f64) -> Result<f64, CriticalError> {
    if !(preference > 0.0 && preference < 1.0) {
        return Err(CriticalError::InvalidPreference { preference });
    }
    let analysis = perturbation_analysis(length, c)?;
    let d = c + preference * analysis.epsilon_c;
    debug_assert!(is_critical(length, d, DEFAULT_TOL).map_or(true, |w| w.is_none()));
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decomposition_finds_canonical_pairs() {
        assert_eq!(two_index_decomposition(3), Some((1, 1)));
        assert_eq!(two_index_decomposition(7), Some((1, 2)));
        assert_eq!(two_index_decomposition(12), Some((2, 2)));
        assert_eq!(two_index_decomposition(4), None);
        assert_eq!(two_index_decomposition(5), None);
    }

    #[test]
    fn known_memberships() {
        // 2π is critical for c = 0 through (m,l) = (1,1); witness prefers it.
        let w = is_critical(2.0 * PI, 0.0, 1e-12).unwrap().unwrap();
        assert_eq!(w, CriticalGenerator::two_index(1, 1));

        // π is critical for c = 0 through the one-index branch, m = 1.
        let w = is_critical(PI, 0.0, 1e-12).unwrap().unwrap();
        assert_eq!(w, CriticalGenerator::one_index(1));

        // Both branch minima exceed 1.
        assert!(is_critical(1.0, 0.0, 1e-9).unwrap().is_none());
    }

    #[test]
    fn rejects_degenerate_drift() {
        assert!(matches!(
            enumerate_critical(-1.0, 5.0),
            Err(CriticalError::Domain { .. })
        ));
        assert!(matches!(
            is_critical(1.0, -2.0, 0.0),
            Err(CriticalError::Domain { .. })
        ));
    }

    #[test]
    fn separation_values_match_the_two_cases() {
        let a = perturbation_analysis(2.0 * PI, 0.0).unwrap();
        assert_eq!(a.case, PerturbationCase::TwoIndexCase);
        assert!((a.separation - 1.0 / 12.0).abs() < 1e-15);

        let a = perturbation_analysis(PI, 0.0).unwrap();
        assert_eq!(a.case, PerturbationCase::OneIndexCase);
        assert!((a.separation - 1.0 / 3.0).abs() < 1e-15);
    }
}
