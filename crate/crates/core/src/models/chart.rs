use serde::{Deserialize, Serialize};

use crate::error::{FieldError, Result};
use crate::expr::{CoordRole, SymbolTable};

/// Which bundle a coordinate vector lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChartKind {
    /// R^k x T^1_k Q: (t, q, v)
    LagrangianBundle,
    /// R^k x (T^1_k)^* Q: (t, q, p)
    HamiltonianBundle,
    /// Whitney sum of the two: (t, q, v, p)
    WhitneySum,
    /// k-tangent bundle of the Hamiltonian bundle: (t, q, p, vt, vq, vp)
    LiftedHamiltonian,
    /// R^k x (E + ... + E): (t, q, y)
    AlgebroidVel,
    /// R^k x (E* + ... + E*): (t, q, w)
    AlgebroidMom,
}

impl ChartKind {
    pub fn is_algebroid(self) -> bool {
        matches!(self, ChartKind::AlgebroidVel | ChartKind::AlgebroidMom)
    }
}

/// Chart descriptor. `m` is zero for non-algebroid kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChartSpec {
    pub kind: ChartKind,
    pub k: usize,
    pub n: usize,
    pub m: usize,
}

impl ChartSpec {
    pub fn new(kind: ChartKind, k: usize, n: usize, m: usize) -> Result<ChartSpec> {
        if k == 0 {
            return Err(FieldError::DimensionMismatch("k must be at least 1".into()));
        }
        if kind.is_algebroid() {
            if m == 0 {
                return Err(FieldError::DimensionMismatch(
                    "algebroid charts need rank m >= 1".into(),
                ));
            }
            Ok(ChartSpec { kind, k, n, m })
        } else {
            Ok(ChartSpec { kind, k, n, m: 0 })
        }
    }

    pub fn lagrangian(k: usize, n: usize) -> ChartSpec {
        Self::new(ChartKind::LagrangianBundle, k, n, 0).expect("k >= 1")
    }

    pub fn hamiltonian(k: usize, n: usize) -> ChartSpec {
        Self::new(ChartKind::HamiltonianBundle, k, n, 0).expect("k >= 1")
    }

    pub fn whitney(k: usize, n: usize) -> ChartSpec {
        Self::new(ChartKind::WhitneySum, k, n, 0).expect("k >= 1")
    }

    pub fn lifted(k: usize, n: usize) -> ChartSpec {
        Self::new(ChartKind::LiftedHamiltonian, k, n, 0).expect("k >= 1")
    }

    pub fn algebroid_vel(k: usize, n: usize, m: usize) -> ChartSpec {
        Self::new(ChartKind::AlgebroidVel, k, n, m).expect("k, m >= 1")
    }

    pub fn algebroid_mom(k: usize, n: usize, m: usize) -> ChartSpec {
        Self::new(ChartKind::AlgebroidMom, k, n, m).expect("k, m >= 1")
    }

    /// Dimension of the base (t, q, p) of the lifted chart.
    fn hdim(&self) -> usize {
        self.k + self.n + self.n * self.k
    }

    pub fn dim(&self) -> usize {
        let (k, n, m) = (self.k, self.n, self.m);
        match self.kind {
            ChartKind::LagrangianBundle | ChartKind::HamiltonianBundle => k + n + n * k,
            ChartKind::WhitneySum => k + n + 2 * n * k,
            ChartKind::LiftedHamiltonian => self.hdim() + k * self.hdim(),
            ChartKind::AlgebroidVel | ChartKind::AlgebroidMom => k + n + m * k,
        }
    }

    /// Coordinate roles in canonical order.
    pub fn roles(&self) -> Vec<CoordRole> {
        let (k, n, m) = (self.k, self.n, self.m);
        let mut r: Vec<CoordRole> = (0..k).map(|a| CoordRole::Time { a }).collect();
        r.extend((0..n).map(|i| CoordRole::Base { i }));
        let vel = |r: &mut Vec<CoordRole>| {
            for i in 0..n {
                for a in 0..k {
                    r.push(CoordRole::Velocity { i, a });
                }
            }
        };
        let mom = |r: &mut Vec<CoordRole>| {
            for a in 0..k {
                for i in 0..n {
                    r.push(CoordRole::Momentum { a, i });
                }
            }
        };
        match self.kind {
            ChartKind::LagrangianBundle => vel(&mut r),
            ChartKind::HamiltonianBundle => mom(&mut r),
            ChartKind::WhitneySum => {
                vel(&mut r);
                mom(&mut r);
            }
            ChartKind::LiftedHamiltonian => {
                mom(&mut r);
                for a in 0..k {
                    for b in 0..k {
                        r.push(CoordRole::LiftTime { a, b });
                    }
                }
                for a in 0..k {
                    for i in 0..n {
                        r.push(CoordRole::LiftBase { a, i });
                    }
                }
                for a in 0..k {
                    for b in 0..k {
                        for i in 0..n {
                            r.push(CoordRole::LiftMomentum { a, b, i });
                        }
                    }
                }
            }
            ChartKind::AlgebroidVel => {
                for alpha in 0..m {
                    for a in 0..k {
                        r.push(CoordRole::AlgVelocity { alpha, a });
                    }
                }
            }
            ChartKind::AlgebroidMom => {
                for a in 0..k {
                    for alpha in 0..m {
                        r.push(CoordRole::AlgMomentum { a, alpha });
                    }
                }
            }
        }
        r
    }

    pub fn names(&self) -> Vec<String> {
        self.roles().iter().map(CoordRole::name).collect()
    }

    pub fn symbols(&self) -> SymbolTable {
        SymbolTable::from_roles(self.roles())
    }

    /// Position of a role in the canonical order, if the chart carries it.
    pub fn index_of(&self, role: CoordRole) -> Option<usize> {
        let (k, n, m) = (self.k, self.n, self.m);
        use ChartKind::*;
        use CoordRole::*;
        let idx = match (self.kind, role) {
            (_, Time { a }) if a < k => a,
            (_, Base { i }) if i < n => k + i,
            (LagrangianBundle | WhitneySum, Velocity { i, a }) if i < n && a < k => self.v(i, a),
            (HamiltonianBundle | WhitneySum | LiftedHamiltonian, Momentum { a, i })
                if i < n && a < k =>
            {
                self.p(a, i)
            }
            (LiftedHamiltonian, LiftTime { a, b }) if a < k && b < k => self.lift_t(a, b),
            (LiftedHamiltonian, LiftBase { a, i }) if a < k && i < n => self.lift_q(a, i),
            (LiftedHamiltonian, LiftMomentum { a, b, i }) if a < k && b < k && i < n => {
                self.lift_p(a, b, i)
            }
            (AlgebroidVel, AlgVelocity { alpha, a }) if alpha < m && a < k => self.y(alpha, a),
            (AlgebroidMom, AlgMomentum { a, alpha }) if alpha < m && a < k => self.w(a, alpha),
            _ => return None,
        };
        Some(idx)
    }

    pub fn index_of_name(&self, name: &str) -> Option<usize> {
        CoordRole::parse(name).and_then(|r| self.index_of(r))
    }

    pub fn t(&self, a: usize) -> usize {
        a
    }

    pub fn q(&self, i: usize) -> usize {
        self.k + i
    }

    /// Velocity slot `v{i}_{a}` (Lagrangian and Whitney charts).
    pub fn v(&self, i: usize, a: usize) -> usize {
        self.k + self.n + i * self.k + a
    }

    /// Momentum slot `p{a}_{i}` (Hamiltonian, Whitney and lifted charts).
    pub fn p(&self, a: usize, i: usize) -> usize {
        let off = match self.kind {
            ChartKind::WhitneySum => self.n * self.k,
            _ => 0,
        };
        self.k + self.n + off + a * self.n + i
    }

    pub fn y(&self, alpha: usize, a: usize) -> usize {
        self.k + self.n + alpha * self.k + a
    }

    pub fn w(&self, a: usize, alpha: usize) -> usize {
        self.k + self.n + a * self.m + alpha
    }

    pub fn lift_t(&self, a: usize, b: usize) -> usize {
        self.hdim() + a * self.k + b
    }

    pub fn lift_q(&self, a: usize, i: usize) -> usize {
        self.hdim() + self.k * self.k + a * self.n + i
    }

    pub fn lift_p(&self, a: usize, b: usize, i: usize) -> usize {
        self.hdim() + self.k * self.k + self.k * self.n + (a * self.k + b) * self.n + i
    }

    /// Number of fiber coordinates after (t, q).
    pub fn fiber_dim(&self) -> usize {
        self.dim() - self.k - self.n
    }
}

/// A coordinate vector tagged with its chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    pub chart: ChartSpec,
    pub values: Vec<f64>,
}

impl ChartPoint {
    pub fn new(chart: ChartSpec, values: Vec<f64>) -> Result<ChartPoint> {
        if values.len() != chart.dim() {
            return Err(FieldError::DimensionMismatch(format!(
                "chart {:?} has dimension {} but {} values were given",
                chart.kind,
                chart.dim(),
                values.len()
            )));
        }
        Ok(ChartPoint { chart, values })
    }

    pub fn zeros(chart: ChartSpec) -> ChartPoint {
        ChartPoint { chart, values: vec![0.0; chart.dim()] }
    }

    fn slot(&self, name: &str) -> Result<usize> {
        self.chart.index_of_name(name).ok_or_else(|| FieldError::IllegalCoordinate {
            name: name.to_string(),
            context: format!("{:?} chart", self.chart.kind),
        })
    }

    pub fn get(&self, name: &str) -> Result<f64> {
        Ok(self.values[self.slot(name)?])
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        let i = self.slot(name)?;
        self.values[i] = value;
        Ok(())
    }

    pub fn with(mut self, name: &str, value: f64) -> Result<ChartPoint> {
        self.set(name, value)?;
        Ok(self)
    }

    pub fn times(&self) -> &[f64] {
        &self.values[..self.chart.k]
    }

    pub fn base(&self) -> &[f64] {
        &self.values[self.chart.k..self.chart.k + self.chart.n]
    }

    pub fn require(&self, kind: ChartKind) -> Result<()> {
        if self.chart.kind != kind {
            return Err(FieldError::DimensionMismatch(format!(
                "expected a point on {:?}, got {:?}",
                kind, self.chart.kind
            )));
        }
        Ok(())
    }
}

impl crate::expr::Assignment for ChartPoint {
    fn value(&self, name: &str) -> Option<f64> {
        self.chart.index_of_name(name).map(|i| self.values[i])
    }
}
