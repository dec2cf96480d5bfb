use serde::Serialize;

use crate::error::{FieldError, Result};
use crate::expr::{Compiled, CoordRole, ScalarField, SymbolTable};

/// Local structure functions of a Lie algebroid: anchor `rho[alpha][i]` and
/// bracket coefficients `c[gamma][alpha][beta]`, all functions of q.
#[derive(Debug, Clone)]
pub struct LieAlgebroidData {
    pub n: usize,
    pub m: usize,
    rho: Vec<ScalarField>,
    c: Vec<ScalarField>,
    names: Vec<String>,
    rho_c: Vec<Compiled>,
    c_c: Vec<Compiled>,
}

/// Structure functions evaluated at one base point.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebroidValues {
    pub n: usize,
    pub m: usize,
    rho: Vec<f64>,
    c: Vec<f64>,
}

impl AlgebroidValues {
    pub fn rho(&self, alpha: usize, i: usize) -> f64 {
        self.rho[alpha * self.n + i]
    }

    pub fn c(&self, gamma: usize, alpha: usize, beta: usize) -> f64 {
        self.c[(gamma * self.m + alpha) * self.m + beta]
    }
}

pub fn base_symbols(n: usize) -> SymbolTable {
    SymbolTable::from_roles((0..n).map(|i| CoordRole::Base { i }))
}

impl LieAlgebroidData {
    /// `rho` has m*n entries (alpha-major), `c` has m^3 entries (gamma, alpha, beta).
    pub fn new(n: usize, m: usize, rho: Vec<ScalarField>, c: Vec<ScalarField>) -> Result<Self> {
        if m == 0 {
            return Err(FieldError::DimensionMismatch("algebroid rank must be >= 1".into()));
        }
        if rho.len() != m * n || c.len() != m * m * m {
            return Err(FieldError::DimensionMismatch(format!(
                "expected {} anchor and {} bracket entries, got {} and {}",
                m * n,
                m * m * m,
                rho.len(),
                c.len()
            )));
        }
        let syms = base_symbols(n);
        for f in rho.iter().chain(&c) {
            if let Some(s) = f.free_symbols().iter().find(|s| !syms.contains(s)) {
                return Err(FieldError::IllegalCoordinate {
                    name: s.clone(),
                    context: "algebroid structure functions (only q's allowed)".into(),
                });
            }
        }
        let names = syms.names().to_vec();
        let rho_c = rho.iter().map(|f| f.compile(&names)).collect::<Result<_>>()?;
        let c_c = c.iter().map(|f| f.compile(&names)).collect::<Result<_>>()?;
        Ok(LieAlgebroidData { n, m, rho, c, names, rho_c, c_c })
    }

    /// From constant arrays.
    pub fn constant(n: usize, m: usize, rho: &[f64], c: &[f64]) -> Result<Self> {
        Self::new(
            n,
            m,
            rho.iter().map(|&v| ScalarField::constant(v)).collect(),
            c.iter().map(|&v| ScalarField::constant(v)).collect(),
        )
    }

    /// E = TQ: identity anchor, zero bracket.
    pub fn tangent_bundle(n: usize) -> Self {
        let mut rho = vec![0.0; n * n];
        for i in 0..n {
            rho[i * n + i] = 1.0;
        }
        Self::constant(n, n, &rho, &vec![0.0; n * n * n]).expect("valid shapes")
    }

    /// so(3) over a one-point base (carried as n = 1 with zero anchor).
    pub fn so3() -> Self {
        let mut c = vec![0.0; 27];
        for (g, a, b, s) in levi_civita() {
            c[(g * 3 + a) * 3 + b] = s;
        }
        Self::constant(1, 3, &[0.0; 3], &c).expect("valid shapes")
    }

    /// Broken bracket used to exercise validation: C^1_{12} = 1 with no partner.
    pub fn broken_example() -> Self {
        let mut c = vec![0.0; 8];
        c[1] = 1.0;
        Self::constant(1, 2, &[0.0; 2], &c).expect("valid shapes")
    }

    pub fn rho(&self, alpha: usize, i: usize) -> &ScalarField {
        &self.rho[alpha * self.n + i]
    }

    pub fn c(&self, gamma: usize, alpha: usize, beta: usize) -> &ScalarField {
        &self.c[(gamma * self.m + alpha) * self.m + beta]
    }

    pub fn base_names(&self) -> &[String] {
        &self.names
    }

    pub fn eval(&self, q: &[f64]) -> Result<AlgebroidValues> {
        if q.len() != self.n {
            return Err(FieldError::DimensionMismatch(format!(
                "base point has {} entries, algebroid base dimension is {}",
                q.len(),
                self.n
            )));
        }
        Ok(AlgebroidValues {
            n: self.n,
            m: self.m,
            rho: self.rho_c.iter().map(|f| f.eval(q)).collect::<Result<_>>()?,
            c: self.c_c.iter().map(|f| f.eval(q)).collect::<Result<_>>()?,
        })
    }

    /// True when rho is the identity and C vanishes identically.
    pub fn is_standard(&self) -> bool {
        self.n == self.m
            && (0..self.m).all(|a| {
                (0..self.n).all(|i| self.rho(a, i).as_constant() == Some(if a == i { 1.0 } else { 0.0 }))
            })
            && self.c.iter().all(ScalarField::is_zero)
    }
}

/// Nonzero entries (gamma, alpha, beta, sign) of the Levi-Civita symbol.
pub fn levi_civita() -> impl Iterator<Item = (usize, usize, usize, f64)> {
    [
        (0, 1, 2, 1.0),
        (1, 2, 0, 1.0),
        (2, 0, 1, 1.0),
        (0, 2, 1, -1.0),
        (1, 0, 2, -1.0),
        (2, 1, 0, -1.0),
    ]
    .into_iter()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlgebroidReport {
    pub antisymmetry_defect: f64,
    pub jacobi_defect: f64,
    pub anchor_defect: f64,
    pub tol: f64,
    pub passes: bool,
}

/// Pointwise check of antisymmetry and both structure equations at the samples.
pub fn validate_algebroid(
    data: &LieAlgebroidData,
    sample_points: &[Vec<f64>],
    tol: f64,
) -> AlgebroidReport {
    let (n, m) = (data.n, data.m);
    let names = data.base_names().to_vec();
    let compile = |f: &ScalarField| f.compile(&names).expect("fields are over q");
    // d rho[alpha][i] / dq_j  and  d C[nu][beta][gamma] / dq_i
    let drho: Vec<Compiled> = (0..m)
        .flat_map(|a| (0..n).map(move |i| (a, i)))
        .flat_map(|(a, i)| (0..n).map(move |j| (a, i, j)))
        .map(|(a, i, j)| compile(&data.rho(a, i).diff(&names[j])))
        .collect();
    let dc: Vec<Compiled> = (0..m * m * m)
        .flat_map(|l| (0..n).map(move |i| (l, i)))
        .map(|(l, i)| compile(&data.c[l].diff(&names[i])))
        .collect();

    let mut anti = 0.0f64;
    let mut jac = 0.0f64;
    let mut anc = 0.0f64;
    let mut failed = false;
    for q in sample_points {
        let Ok(v) = data.eval(q) else {
            failed = true;
            continue;
        };
        let ev = |c: &Compiled| c.eval(q).unwrap_or(f64::INFINITY);
        let drho_v: Vec<f64> = drho.iter().map(ev).collect();
        let dc_v: Vec<f64> = dc.iter().map(ev).collect();
        let drho_at = |a: usize, i: usize, j: usize| drho_v[(a * n + i) * n + j];
        let dc_at = |g: usize, a: usize, b: usize, i: usize| dc_v[((g * m + a) * m + b) * n + i];

        for g in 0..m {
            for a in 0..m {
                for b in 0..m {
                    anti = anti.max((v.c(g, a, b) + v.c(g, b, a)).abs());
                }
            }
        }
        for nu in 0..m {
            for a in 0..m {
                for b in 0..m {
                    for g in 0..m {
                        let mut s = 0.0;
                        for (x, y, z) in [(a, b, g), (b, g, a), (g, a, b)] {
                            for i in 0..n {
                                s += v.rho(x, i) * dc_at(nu, y, z, i);
                            }
                            for mu in 0..m {
                                s += v.c(nu, x, mu) * v.c(mu, y, z);
                            }
                        }
                        jac = jac.max(s.abs());
                    }
                }
            }
        }
        for a in 0..m {
            for b in 0..m {
                for i in 0..n {
                    let mut s = 0.0;
                    for j in 0..n {
                        s += v.rho(a, j) * drho_at(b, i, j) - v.rho(b, j) * drho_at(a, i, j);
                    }
                    for g in 0..m {
                        s -= v.rho(g, i) * v.c(g, a, b);
                    }
                    anc = anc.max(s.abs());
                }
            }
        }
    }
    if failed || !(anti.is_finite() && jac.is_finite() && anc.is_finite()) {
        return AlgebroidReport {
            antisymmetry_defect: if anti.is_finite() { anti } else { f64::MAX },
            jacobi_defect: if jac.is_finite() { jac } else { f64::MAX },
            anchor_defect: if anc.is_finite() { anc } else { f64::MAX },
            tol,
            passes: false,
        };
    }
    AlgebroidReport {
        antisymmetry_defect: anti,
        jacobi_defect: jac,
        anchor_defect: anc,
        tol,
        passes: anti <= tol && jac <= tol && anc <= tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn samples(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect()
    }

    fn q_field(text: &str, n: usize) -> ScalarField {
        ScalarField::parse(text, &base_symbols(n)).unwrap()
    }

    /// Action algebroid of so(3) on R^3: rho^g_a = eps_{a g b} q_b.
    pub(crate) fn so3_action() -> LieAlgebroidData {
        let z = || ScalarField::constant(0.0);
        let mut rho = vec![z(); 9];
        for (a, g, b, s) in levi_civita() {
            let term = q_field(&format!("({s:?})*q{}", b + 1), 3);
            rho[a * 3 + g] = if rho[a * 3 + g].is_zero() { term } else { rho[a * 3 + g].add(&term) };
        }
        let mut c = vec![z(); 27];
        for (g, a, b, s) in levi_civita() {
            c[(g * 3 + a) * 3 + b] = ScalarField::constant(s);
        }
        LieAlgebroidData::new(3, 3, rho, c).unwrap()
    }

    #[test]
    fn so3_passes_exactly() {
        let r = validate_algebroid(&LieAlgebroidData::so3(), &samples(1, 20, 1), 1e-14);
        assert_eq!(r.antisymmetry_defect, 0.0);
        assert_eq!(r.jacobi_defect, 0.0);
        assert_eq!(r.anchor_defect, 0.0);
        assert!(r.passes);
    }

    #[test]
    fn tangent_bundle_passes_exactly() {
        let r = validate_algebroid(&LieAlgebroidData::tangent_bundle(3), &samples(3, 20, 2), 1e-14);
        assert!(r.passes);
        assert_eq!(r.jacobi_defect + r.anchor_defect + r.antisymmetry_defect, 0.0);
    }

    #[test]
    fn broken_bracket_rejected() {
        let r = validate_algebroid(&LieAlgebroidData::broken_example(), &samples(1, 5, 3), 1e-10);
        assert_eq!(r.antisymmetry_defect, 1.0);
        assert!(!r.passes);
    }

    #[test]
    fn action_algebroid_satisfies_structure_equations() {
        let alg = so3_action();
        let r = validate_algebroid(&alg, &samples(3, 50, 4), 1e-10);
        assert!(r.passes, "{r:?}");
        // fresh samples agree
        assert!(validate_algebroid(&alg, &samples(3, 50, 5), 1e-10).passes);
    }

    #[test]
    fn wrong_anchor_sign_breaks_compatibility() {
        // Same anchor as the action algebroid but the opposite bracket.
        let alg = so3_action();
        let mut c = Vec::new();
        for g in 0..3 {
            for a in 0..3 {
                for b in 0..3 {
                    c.push(alg.c(g, a, b).scale(-1.0));
                }
            }
        }
        let rho: Vec<_> = (0..3).flat_map(|a| (0..3).map(move |i| (a, i))).map(|(a, i)| alg.rho(a, i).clone()).collect();
        let flipped = LieAlgebroidData::new(3, 3, rho, c).unwrap();
        let r = validate_algebroid(&flipped, &samples(3, 10, 6), 1e-10);
        assert!(r.anchor_defect > 0.1, "{r:?}");
        assert!(r.jacobi_defect > 0.0 || r.anchor_defect > 0.0);
    }

    #[test]
    fn rejects_non_base_symbols() {
        let bad = ScalarField::var("t1");
        let err = LieAlgebroidData::new(1, 1, vec![bad], vec![ScalarField::constant(0.0)]);
        assert!(matches!(err, Err(FieldError::IllegalCoordinate { .. })));
    }

    #[test]
    fn standard_detection() {
        assert!(LieAlgebroidData::tangent_bundle(2).is_standard());
        assert!(!LieAlgebroidData::so3().is_standard());
    }
}
