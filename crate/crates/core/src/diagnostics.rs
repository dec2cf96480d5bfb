//! Scalar defect measures shared by the command line, the C interface and
//! the acceptance suite. Every function returns a nonnegative number that is
//! zero for an exact implementation.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{FieldError, Result};
use crate::expr::{fd_check, ScalarField};
use crate::forms;
use crate::hamiltonian::{hdw_kvector, LegendreHamiltonian};
use crate::kvector::SolveOptions;
use crate::lagrangian::Lagrangian;
use crate::models::{ChartKind, ChartPoint, ChartSpec, FieldSection};

/// Reproducible uniform samples in `[-scale, scale]^dim`.
pub fn random_points(dim: usize, count: usize, seed: u64, scale: f64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| (0..dim).map(|_| rng.gen_range(-scale..=scale)).collect()).collect()
}

/// Largest coefficient discrepancy of FL^* theta^A - theta_L^A and
/// FL^* omega^A - omega_L^A at `x`.
pub fn pullback_defect(l: &Lagrangian, x: &[f64]) -> Result<f64> {
    let xp = ChartPoint::new(l.chart(), x.to_vec())?;
    let y = l.legendre_map(&xp)?;
    let j = l.legendre_jacobian(x)?;
    let cd = l.cartan_data(&xp)?;
    let h = y.chart;
    let d = h.dim();
    let mut worst = 0.0f64;
    for a in 0..l.k {
        let mut th = DVector::zeros(d);
        let mut om = DMatrix::zeros(d, d);
        for i in 0..l.n {
            th[h.q(i)] = y.values[h.p(a, i)];
            om += forms::wedge(&forms::basis(d, h.q(i)), &forms::basis(d, h.p(a, i)));
        }
        worst = worst.max((forms::pullback1(&th, &j) - cd.theta_form(a)).amax());
        worst = worst.max((forms::pullback2(&om, &j) - cd.omega_form(a)).amax());
    }
    Ok(worst)
}

/// Mismatch between the Legendre pushforward of the SOPDE at `x` and the
/// HDW field at FL(x) on the components fixed by the field equations:
/// every dq entry and the traces of the dp block.
pub fn fl_relatedness_defect(l: &Lagrangian, x: &[f64], opts: &SolveOptions) -> Result<f64> {
    let lh = LegendreHamiltonian::new(l.clone());
    let sol = l.sopde_solve_at(x, opts)?;
    let kv = sol.to_kvector(x);
    let j = l.legendre_jacobian(x)?;
    let y = l.legendre_map(&ChartPoint::new(l.chart(), x.to_vec())?)?;
    let hk = hdw_kvector(&lh, &y.values)?;
    let hc = y.chart;
    let pushed: Vec<DVector<f64>> =
        (0..l.k).map(|a| &j * DVector::from_column_slice(kv.vector(a))).collect();
    let mut worst = 0.0f64;
    for (a, p) in pushed.iter().enumerate() {
        for i in 0..l.n {
            worst = worst.max((p[hc.q(i)] - hk.get(a, hc.q(i))).abs());
        }
    }
    for i in 0..l.n {
        let tr: f64 = (0..l.k).map(|a| pushed[a][hc.p(a, i)]).sum();
        let want: f64 = (0..l.k).map(|a| hk.get(a, hc.p(a, i))).sum();
        worst = worst.max((tr - want).abs());
    }
    Ok(worst)
}

/// Largest relative central-difference discrepancy `|d - fd| / (1 + |d|)`
/// over all first derivatives of `f` in the coordinates `names`, and over
/// their first derivatives too when `second` is set.
pub fn gradient_defect(f: &ScalarField, names: &[String], x: &[f64], h: f64, second: bool) -> Result<f64> {
    let mut worst = 0.0f64;
    for c in names {
        let r = fd_check(f, c, names, x, h)?;
        worst = worst.max(r.difference / (1.0 + r.symbolic.abs()));
        if second {
            let g = f.diff(c);
            for c2 in names {
                let r = fd_check(&g, c2, names, x, h)?;
                worst = worst.max(r.difference / (1.0 + r.symbolic.abs()));
            }
        }
    }
    if !worst.is_finite() {
        return Err(FieldError::Config("non-finite derivative".into()));
    }
    Ok(worst)
}

/// Image of a Lagrangian-chart section under the Legendre map.
pub fn legendre_section(l: &Lagrangian, s: &FieldSection) -> Result<FieldSection> {
    if s.chart.kind != ChartKind::LagrangianBundle || s.chart != l.chart() {
        return Err(FieldError::DimensionMismatch("section must live on the Lagrangian chart of L".into()));
    }
    s.map(ChartSpec::hamiltonian(l.k, l.n), |x| {
        Ok(l.legendre_map(&ChartPoint::new(l.chart(), x.to_vec())?)?.values)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lag(text: &str, k: usize, n: usize) -> Lagrangian {
        let chart = ChartSpec::lagrangian(k, n);
        Lagrangian::new(ScalarField::parse(text, &chart.symbols()).unwrap(), k, n).unwrap()
    }

    #[test]
    fn samples_are_reproducible() {
        let a = random_points(3, 4, 9, 1.0);
        assert_eq!(a, random_points(3, 4, 9, 1.0));
        assert_ne!(a, random_points(3, 4, 10, 1.0));
        assert!(a.iter().flatten().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn defects_vanish_for_regular_lagrangian() {
        let l = lag("0.5*(v1_1^2 + v1_2^2) + 0.1*q1^2*v1_1 - cos(q1)", 2, 1);
        for x in random_points(5, 10, 1, 1.0) {
            assert!(pullback_defect(&l, &x).unwrap() <= 1e-12);
            assert!(fl_relatedness_defect(&l, &x, &SolveOptions::default()).unwrap() <= 1e-9);
            assert!(gradient_defect(l.field(), &l.chart().names(), &x, 1e-5, true).unwrap() <= 1e-6);
        }
    }

    #[test]
    fn gradient_defect_grows_with_step() {
        let chart = ChartSpec::lagrangian(1, 1);
        let f = ScalarField::parse("sin(10*q1)", &chart.symbols()).unwrap();
        let names = chart.names();
        let x = [0.0, 0.3, 0.0];
        assert!(gradient_defect(&f, &names, &x, 1e-5, false).unwrap() <= 1e-6);
        assert!(gradient_defect(&f, &names, &x, 0.1, false).unwrap() > 1e-2);
    }

    #[test]
    fn legendre_section_maps_nodes() {
        let l = lag("0.5*(v1_1^2 + v1_2^2)", 2, 1);
        let g = crate::models::GridSpec::unit_box(&[3, 3]);
        let s = FieldSection::from_fn(l.chart(), g, |t| vec![t[0], t[1], t[0] * t[1], t[1], t[0]]).unwrap();
        let h = legendre_section(&l, &s).unwrap();
        assert_eq!(h.node(&[2, 1]), &[1.0, 0.5, 0.5, 0.5, 1.0][..]);
    }
}
