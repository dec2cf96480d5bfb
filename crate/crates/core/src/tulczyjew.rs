//! The derivations i_{T_A}, d_{T_A} on canonical forms, evaluated in the
//! lifted chart, and membership residuals for the Lagrangian and Hamiltonian
//! submanifolds.

use serde::Serialize;

use crate::error::{FieldError, Result};
use crate::hamiltonian::HamiltonianFunction;
use crate::integrator::second_jet;
use crate::lagrangian::Lagrangian;
use crate::linalg;
use crate::models::{ChartKind, ChartPoint, ChartSpec, FieldSection};

/// A point of the k-tangent bundle of the Hamiltonian chart.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiftedPoint {
    pub chart: ChartSpec,
    pub values: Vec<f64>,
}

impl LiftedPoint {
    pub fn zeros(k: usize, n: usize) -> LiftedPoint {
        let chart = ChartSpec::lifted(k, n);
        LiftedPoint { chart, values: vec![0.0; chart.dim()] }
    }

    pub fn from_point(x: ChartPoint) -> Result<LiftedPoint> {
        x.require(ChartKind::LiftedHamiltonian)?;
        Ok(LiftedPoint { chart: x.chart, values: x.values })
    }

    pub fn k(&self) -> usize {
        self.chart.k
    }

    pub fn n(&self) -> usize {
        self.chart.n
    }

    /// (t, q, p) of the base point.
    pub fn base(&self) -> &[f64] {
        let c = self.chart;
        &self.values[..c.k + c.n + c.k * c.n]
    }

    pub fn p(&self, a: usize, i: usize) -> f64 {
        self.values[self.chart.p(a, i)]
    }

    /// (v_A)^B
    pub fn vt(&self, a: usize, b: usize) -> f64 {
        self.values[self.chart.lift_t(a, b)]
    }

    /// (v_A)^i
    pub fn vq(&self, a: usize, i: usize) -> f64 {
        self.values[self.chart.lift_q(a, i)]
    }

    /// (v_A)^B_i
    pub fn vp(&self, a: usize, b: usize, i: usize) -> f64 {
        self.values[self.chart.lift_p(a, b, i)]
    }

    pub fn set(&mut self, slot: usize, v: f64) {
        self.values[slot] = v;
    }

    /// W_A as a tangent vector of the Hamiltonian chart.
    pub fn tangent(&self, a: usize) -> Vec<f64> {
        let c = self.chart;
        let mut out = Vec::with_capacity(c.k + c.n + c.k * c.n);
        out.extend((0..c.k).map(|b| self.vt(a, b)));
        out.extend((0..c.n).map(|i| self.vq(a, i)));
        for b in 0..c.k {
            out.extend((0..c.n).map(|i| self.vp(a, b, i)));
        }
        out
    }
}

/// Coefficients of a 1-form on the lifted chart.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OneForm {
    pub chart: ChartSpec,
    pub coeffs: Vec<f64>,
}

impl OneForm {
    fn zeros(chart: ChartSpec) -> OneForm {
        OneForm { chart, coeffs: vec![0.0; chart.dim()] }
    }

    pub fn dq(&self, i: usize) -> f64 {
        self.coeffs[self.chart.q(i)]
    }

    pub fn dp(&self, a: usize, i: usize) -> f64 {
        self.coeffs[self.chart.p(a, i)]
    }

    /// Coefficient of d(v_A)^i.
    pub fn dvq(&self, a: usize, i: usize) -> f64 {
        self.coeffs[self.chart.lift_q(a, i)]
    }
}

/// i_{T_A} omega^A = (v_A)^i dp^A_i - (v_A)^A_i dq^i, one record per A.
pub fn it_omega(w: &LiftedPoint) -> Vec<OneForm> {
    let c = w.chart;
    (0..c.k)
        .map(|a| {
            let mut f = OneForm::zeros(c);
            for i in 0..c.n {
                f.coeffs[c.p(a, i)] = w.vq(a, i);
                f.coeffs[c.q(i)] = -w.vp(a, a, i);
            }
            f
        })
        .collect()
}

/// d_{T_A} theta^A = (v_A)^A_i dq^i + p^A_i d(v_A)^i, one record per A.
pub fn dt_theta(w: &LiftedPoint) -> Vec<OneForm> {
    let c = w.chart;
    (0..c.k)
        .map(|a| {
            let mut f = OneForm::zeros(c);
            for i in 0..c.n {
                f.coeffs[c.q(i)] = w.vp(a, a, i);
                f.coeffs[c.lift_q(a, i)] = w.p(a, i);
            }
            f
        })
        .collect()
}

/// i_{T_A} theta^A = p^A_i (v_A)^i.
pub fn it_theta(w: &LiftedPoint) -> Vec<f64> {
    let c = w.chart;
    (0..c.k).map(|a| (0..c.n).map(|i| w.p(a, i) * w.vq(a, i)).sum()).collect()
}

/// Residuals of the Hamiltonian constraints.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DhResidual {
    /// (v_A)^B - delta, `A*k + B`
    pub time: Vec<f64>,
    /// (v_A)^i - dH/dp^A_i, `A*n + i`
    pub velocity: Vec<f64>,
    /// sum_A (v_A)^A_i + dH/dq^i
    pub momentum: Vec<f64>,
}

impl DhResidual {
    pub fn max_abs(&self) -> f64 {
        linalg::max_abs(&self.time).max(linalg::max_abs(&self.velocity)).max(linalg::max_abs(&self.momentum))
    }
}

fn time_residual(w: &LiftedPoint) -> Vec<f64> {
    let k = w.k();
    let mut out = Vec::with_capacity(k * k);
    for a in 0..k {
        for b in 0..k {
            out.push(w.vt(a, b) - if a == b { 1.0 } else { 0.0 });
        }
    }
    out
}

pub fn dh_residual(h: &dyn HamiltonianFunction, w: &LiftedPoint) -> Result<DhResidual> {
    let hc = h.chart();
    if hc.kind != ChartKind::HamiltonianBundle || hc.k != w.k() || hc.n != w.n() {
        return Err(FieldError::DimensionMismatch("Hamiltonian and lifted point disagree on k, n".into()));
    }
    let (k, n) = (w.k(), w.n());
    let g = h.gradient(w.base())?;
    let mut velocity = Vec::with_capacity(k * n);
    for a in 0..k {
        for i in 0..n {
            velocity.push(w.vq(a, i) - g.dp[a * n + i]);
        }
    }
    let momentum = (0..n).map(|i| (0..k).map(|a| w.vp(a, a, i)).sum::<f64>() + g.dq[i]).collect();
    Ok(DhResidual { time: time_residual(w), velocity, momentum })
}

/// Residuals of the Lagrangian constraints, F(W) = (t, q, (v_A)^i).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DlResidual {
    /// p^A_i - dL/dv^i_A o F, `A*n + i`
    pub momentum: Vec<f64>,
    /// sum_A (v_A)^A_i - dL/dq^i o F
    pub trace: Vec<f64>,
    /// (v_A)^B - delta
    pub time: Vec<f64>,
}

impl DlResidual {
    pub fn max_abs(&self) -> f64 {
        linalg::max_abs(&self.time).max(linalg::max_abs(&self.momentum)).max(linalg::max_abs(&self.trace))
    }
}

/// The map F onto the Lagrangian chart.
pub fn lagrangian_projection(w: &LiftedPoint) -> Vec<f64> {
    let (k, n) = (w.k(), w.n());
    let mut x = w.values[..k + n].to_vec();
    for i in 0..n {
        for a in 0..k {
            x.push(w.vq(a, i));
        }
    }
    x
}

pub fn dl_residual(l: &Lagrangian, w: &LiftedPoint) -> Result<DlResidual> {
    if l.k != w.k() || l.n != w.n() {
        return Err(FieldError::DimensionMismatch("Lagrangian and lifted point disagree on k, n".into()));
    }
    let (k, n) = (l.k, l.n);
    let d = l.derivs(&lagrangian_projection(w))?;
    let mut momentum = Vec::with_capacity(k * n);
    for a in 0..k {
        for i in 0..n {
            momentum.push(w.p(a, i) - d.theta(a, i));
        }
    }
    let trace = (0..n).map(|i| (0..k).map(|a| w.vp(a, a, i)).sum::<f64>() - d.dq[i]).collect();
    Ok(DlResidual { momentum, trace, time: time_residual(w) })
}

/// First prolongation of a Hamiltonian-chart section at its interior nodes.
pub fn prolong_cotangent_section(s: &FieldSection) -> Result<Vec<(Vec<usize>, LiftedPoint)>> {
    let c = s.chart;
    if c.kind != ChartKind::HamiltonianBundle {
        return Err(FieldError::Config(format!("expected a Hamiltonian-bundle section, got {:?}", c.kind)));
    }
    let (k, n) = (c.k, c.n);
    let mut out = Vec::new();
    for node in s.grid.interior_nodes() {
        let rec = second_jet(s, &node)?;
        let mut w = LiftedPoint::zeros(k, n);
        let lc = w.chart;
        w.values[..c.dim()].copy_from_slice(&rec.values);
        for a in 0..k {
            for b in 0..k {
                w.set(lc.lift_t(a, b), rec.first(c.t(b), a));
            }
            for i in 0..n {
                w.set(lc.lift_q(a, i), rec.first(c.q(i), a));
                for b in 0..k {
                    w.set(lc.lift_p(a, b, i), rec.first(c.p(b, i), a));
                }
            }
        }
        out.push((node, w));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::ScalarField;
    use crate::hamiltonian::{canonical_omega, canonical_theta, hamilton_residual_on_section, ExprHamiltonian, HdwField};
    use crate::integrator::integrate_kvector;
    use crate::lagrangian::lagrangian_jet;
    use crate::models::GridSpec;
    use proptest::prelude::*;

    fn ham(text: &str, k: usize, n: usize) -> ExprHamiltonian {
        let c = ChartSpec::hamiltonian(k, n);
        ExprHamiltonian::new(ScalarField::parse(text, &c.symbols()).unwrap(), c).unwrap()
    }

    fn lag(text: &str, k: usize, n: usize) -> Lagrangian {
        let c = ChartSpec::lagrangian(k, n);
        Lagrangian::new(ScalarField::parse(text, &c.symbols()).unwrap(), k, n).unwrap()
    }

    /// Brute-force i_{T_A} of a 2-form on the base: Z -> w(W_A, tau_* Z).
    fn brute_it(w2: &nalgebra::DMatrix<f64>, w: &LiftedPoint, a: usize) -> Vec<f64> {
        let base = w.base().len();
        let wa = nalgebra::DVector::from_vec(w.tangent(a));
        (0..w.chart.dim())
            .map(|s| if s < base { (wa.transpose() * w2.column(s))[0] } else { 0.0 })
            .collect()
    }

    fn lifted(values: Vec<f64>, k: usize, n: usize) -> LiftedPoint {
        LiftedPoint { chart: ChartSpec::lifted(k, n), values }
    }

    #[test]
    fn it_omega_examples() {
        let mut w = LiftedPoint::zeros(2, 1);
        let c = w.chart;
        w.set(c.lift_q(0, 0), 3.0);
        w.set(c.lift_p(0, 0, 0), 5.0);
        let r = it_omega(&w);
        assert_eq!(r[0].dq(0), -5.0);
        assert_eq!(r[0].dp(0, 0), 3.0);
        assert!(r[1].coeffs.iter().all(|&v| v == 0.0));
        let z = it_omega(&LiftedPoint::zeros(2, 1));
        assert!(z.iter().all(|f| f.coeffs.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn dt_theta_examples() {
        let mut w = LiftedPoint::zeros(2, 1);
        let c = w.chart;
        w.set(c.lift_p(0, 0, 0), 5.0);
        w.set(c.p(0, 0), 2.0);
        let r = dt_theta(&w);
        assert_eq!(r[0].dq(0), 5.0);
        assert_eq!(r[0].dvq(0, 0), 2.0);
        let z = dt_theta(&LiftedPoint::zeros(2, 1));
        assert!(z.iter().all(|f| f.coeffs.iter().all(|&v| v == 0.0)));
    }

    /// First prolongation of psi = t1 t2, p = (t2, t1) at (t1, t2).
    fn prolonged_t1t2(t1: f64, t2: f64) -> LiftedPoint {
        let mut w = LiftedPoint::zeros(2, 1);
        let c = w.chart;
        w.values[..5].copy_from_slice(&[t1, t2, t1 * t2, t2, t1]);
        for a in 0..2 {
            w.set(c.lift_t(a, a), 1.0);
        }
        w.set(c.lift_q(0, 0), t2);
        w.set(c.lift_q(1, 0), t1);
        // dp^1/dt2 = 1, dp^2/dt1 = 1.
        w.set(c.lift_p(1, 0, 0), 1.0);
        w.set(c.lift_p(0, 1, 0), 1.0);
        w
    }

    #[test]
    fn dh_examples() {
        let h = ham("0.5*(p1_1^2 + p2_1^2)", 2, 1);
        let w = prolonged_t1t2(0.3, 0.6);
        assert_eq!(dh_residual(&h, &w).unwrap().max_abs(), 0.0);

        let r = dh_residual(&h, &LiftedPoint::zeros(2, 1)).unwrap();
        assert_eq!(r.time, vec![-1.0, 0.0, 0.0, -1.0]);

        let mut w2 = w.clone();
        let eps = 1e-3;
        let slot = w2.chart.lift_p(0, 0, 0);
        w2.values[slot] += eps;
        let r = dh_residual(&h, &w2).unwrap();
        assert_eq!(r.momentum, vec![eps]);
        assert_eq!(r.time.len(), 4);
        assert_eq!(r.velocity.len(), 2);
    }

    #[test]
    fn dl_examples() {
        let l = lag("0.5*(v1_1^2 + v1_2^2)", 2, 1);
        let w = prolonged_t1t2(0.25, 0.75);
        assert_eq!(dl_residual(&l, &w).unwrap().max_abs(), 0.0);

        let zero = lag("0", 2, 1);
        let r = dl_residual(&zero, &w).unwrap();
        assert_eq!(r.momentum, vec![0.75, 0.25]);
        assert_eq!(r.trace, vec![0.0]);

        let mut w2 = w.clone();
        let slot = w2.chart.p(1, 0);
        w2.values[slot] += 0.5;
        let r = dl_residual(&l, &w2).unwrap();
        assert_eq!(r.momentum, vec![0.0, 0.5]);
    }

    fn cotangent_section(f: impl Fn(&[f64]) -> Vec<f64>, counts: &[usize]) -> FieldSection {
        FieldSection::from_fn(ChartSpec::hamiltonian(2, 1), GridSpec::unit_box(counts), |t| {
            let mut x = t.to_vec();
            x.extend(f(t));
            x
        })
        .unwrap()
    }

    #[test]
    fn linear_section_prolongs_exactly() {
        let s = cotangent_section(|t| vec![2.0 * t[0] - t[1], 0.5, t[1]], &[5, 5]);
        let pts = prolong_cotangent_section(&s).unwrap();
        assert_eq!(pts.len(), 9);
        for (_, w) in pts {
            assert_eq!(w.vq(0, 0), 2.0);
            assert_eq!(w.vq(1, 0), -1.0);
            assert_eq!(w.vp(1, 1, 0), 1.0);
            assert_eq!(w.vp(0, 1, 0), 0.0);
            assert!((w.vt(0, 0) - 1.0).abs() < 1e-14 && w.vt(0, 1).abs() < 1e-14);
        }
    }

    #[test]
    fn hdw_pipeline_lies_in_dh() {
        let h = ham("0.5*(p1_1^2 + p2_1^2)", 2, 1);
        let x0 = ChartPoint::new(h.chart(), vec![0.0, 0.0, 0.0, 1.0, 1.0]).unwrap();
        let s = integrate_kvector(&HdwField { h: &h }, &x0, &GridSpec::unit_box(&[33, 33]), 1).unwrap();
        for node in s.grid.nodes() {
            let t = s.grid.time_of(&node);
            assert!((s.node(&node)[2] - (t[0] + t[1])).abs() <= 1e-8);
        }
        let pts = prolong_cotangent_section(&s).unwrap();
        assert!(pts.iter().all(|(_, w)| dh_residual(&h, w).unwrap().max_abs() <= 1e-8));
        let hr = hamilton_residual_on_section(&h, &s).unwrap();
        assert!(hr.iter().all(|(_, r)| r.max_abs() <= 1e-8));
    }

    #[test]
    fn lagrangian_pipeline_lies_in_dl() {
        let l = lag("0.5*(v1_1^2 + v1_2^2)", 2, 1);
        let s = cotangent_section(|t| vec![t[0] * t[1], t[1], t[0]], &[33, 33]);
        let pts = prolong_cotangent_section(&s).unwrap();
        assert!(pts.iter().all(|(_, w)| dl_residual(&l, w).unwrap().max_abs() <= 1e-10));
        let q = s.map(ChartSpec::lagrangian(2, 1), |x| Ok(vec![x[0], x[1], x[2], 0.0, 0.0])).unwrap();
        for node in q.grid.interior_nodes() {
            let r = l.el_residual_on_jet(&lagrangian_jet(&q, &node).unwrap()).unwrap();
            assert!(r[0].abs() <= 1e-10);
        }
    }

    fn arb_lifted(k: usize, n: usize) -> impl Strategy<Value = LiftedPoint> {
        let d = ChartSpec::lifted(k, n).dim();
        proptest::collection::vec(-3.0f64..3.0, d).prop_map(move |v| lifted(v, k, n))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn it_omega_matches_brute_force(w in arb_lifted(2, 2)) {
            let hc = ChartSpec::hamiltonian(2, 2);
            let r = it_omega(&w);
            for a in 0..2 {
                let b = brute_it(&canonical_omega(hc, a), &w, a);
                for s in 0..b.len() {
                    prop_assert!((r[a].coeffs[s] - b[s]).abs() <= 1e-12);
                }
            }
        }

        #[test]
        fn derivation_identity(w in arb_lifted(3, 2)) {
            // d_T theta = -i_T omega + d(i_T theta); the last term by central
            // differences, exact for the bilinear function p (v_A)^i.
            let it = it_omega(&w);
            let dt = dt_theta(&w);
            let hc = ChartSpec::hamiltonian(3, 2);
            for a in 0..3 {
                for s in 0..w.values.len() {
                    let h = 0.5;
                    let mut wp = w.clone();
                    let mut wm = w.clone();
                    wp.values[s] += h;
                    wm.values[s] -= h;
                    let d = (it_theta(&wp)[a] - it_theta(&wm)[a]) / (2.0 * h);
                    prop_assert!((dt[a].coeffs[s] - (-it[a].coeffs[s] + d)).abs() <= 1e-12);
                }
                // i_T theta agrees with theta(W_A) from the canonical covector.
                let th = canonical_theta(hc, w.base(), a);
                let wa = nalgebra::DVector::from_vec(w.tangent(a));
                prop_assert!((th.dot(&wa) - it_theta(&w)[a]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn dh_membership_transfers_to_hamilton_equations() {
        // Any section whose prolongation lies in D_H solves the field equations.
        let h = ham("0.5*(p1_1^2 + p2_1^2) + 0.5*q1^2", 2, 1);
        let x0 = ChartPoint::new(h.chart(), vec![0.0, 0.0, 0.2, 0.4, -0.1]).unwrap();
        let g = GridSpec { counts: vec![17, 17], spacing: vec![1.0 / 64.0; 2], origin: vec![0.0; 2] };
        let s = integrate_kvector(&HdwField { h: &h }, &x0, &g, 2).unwrap();
        let pts = prolong_cotangent_section(&s).unwrap();
        let hr = hamilton_residual_on_section(&h, &s).unwrap();
        for ((na, w), (nb, r)) in pts.iter().zip(&hr) {
            assert_eq!(na, nb);
            let d = dh_residual(&h, w).unwrap();
            assert!((d.velocity.iter().zip(&r.velocity).map(|(x, y)| (x + y).abs()).fold(0.0, f64::max)) <= 1e-12);
            assert!((d.momentum[0] - r.momentum[0]).abs() <= 1e-12);
        }
    }
}
