//! Integral sections by composed flows, finite-difference jets, and
//! commutation diagnostics.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{FieldError, Result};
use crate::kvector::KVectorField;
use crate::models::{ChartPoint, FieldSection, GridSpec};

/// One classical RK4 step of the A-th vector of `field`.
fn rk4_step(field: &dyn KVectorField, a: usize, x: &[f64], h: f64) -> Result<Vec<f64>> {
    let f = |y: &[f64]| -> Result<Vec<f64>> { Ok(field.eval(y)?.vector(a).to_vec()) };
    let axpy = |y: &[f64], s: f64, k: &[f64]| -> Vec<f64> {
        y.iter().zip(k).map(|(u, v)| u + s * v).collect()
    };
    let k1 = f(x)?;
    let k2 = f(&axpy(x, 0.5 * h, &k1))?;
    let k3 = f(&axpy(x, 0.5 * h, &k2))?;
    let k4 = f(&axpy(x, h, &k3))?;
    Ok((0..x.len())
        .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Flow of X_A for time `h`, split into `substeps` equal RK4 steps.
pub fn flow(
    field: &dyn KVectorField,
    a: usize,
    x: &[f64],
    h: f64,
    substeps: usize,
) -> Result<Vec<f64>> {
    let s = substeps.max(1);
    let dt = h / s as f64;
    let mut y = x.to_vec();
    for _ in 0..s {
        y = rk4_step(field, a, &y, dt)?;
    }
    Ok(y)
}

/// Integral section through `x0`: node (i_1..i_k) is
/// Fl^{X_k}_{i_k h_k} o ... o Fl^{X_1}_{i_1 h_1}(x0).
pub fn integrate_kvector(
    field: &dyn KVectorField,
    x0: &ChartPoint,
    grid: &GridSpec,
    substeps: usize,
) -> Result<FieldSection> {
    let order: Vec<usize> = (0..grid.counts.len()).collect();
    integrate_kvector_ordered(field, x0, grid, substeps, &order)
}

/// As [`integrate_kvector`], applying the flows in the axis order given.
pub fn integrate_kvector_ordered(
    field: &dyn KVectorField,
    x0: &ChartPoint,
    grid: &GridSpec,
    substeps: usize,
    order: &[usize],
) -> Result<FieldSection> {
    let chart = field.chart();
    let k = chart.k;
    grid.validate(k)?;
    if x0.chart != chart {
        return Err(FieldError::DimensionMismatch(format!(
            "initial point is on {:?}, field lives on {:?}",
            x0.chart.kind, chart.kind
        )));
    }
    let mut sorted = order.to_vec();
    sorted.sort_unstable();
    if sorted != (0..k).collect::<Vec<_>>() {
        return Err(FieldError::Config(format!("{order:?} is not an ordering of the {k} axes")));
    }
    for a in 0..k {
        if (x0.values[chart.t(a)] - grid.origin[a]).abs() > 1e-12 * (1.0 + grid.origin[a].abs()) {
            return Err(FieldError::InvalidGrid(format!(
                "initial t{} = {} differs from the grid origin {}",
                a + 1,
                x0.values[chart.t(a)],
                grid.origin[a]
            )));
        }
    }
    let start = field.eval(&x0.values).map_err(|e| FieldError::AtNode {
        node: vec![0; k],
        source: Box::new(e),
    })?;
    if start.time_defect() > 1e-12 {
        return Err(FieldError::Config(
            "the field's dt components are not the identity; times cannot advance canonically"
                .into(),
        ));
    }

    let d = chart.dim();
    let mut values = vec![f64::NAN; grid.node_count() * d];
    values[..d].copy_from_slice(&x0.values);
    let mut known: Vec<Vec<usize>> = vec![vec![0; k]];
    for &ax in order {
        let h = grid.spacing[ax];
        let count = grid.counts[ax];
        let lines: Vec<Result<Vec<(Vec<usize>, Vec<f64>)>>> = known
            .par_iter()
            .map(|start| {
                let mut node = start.clone();
                let l = grid.linear(&node);
                let mut x = values[l * d..(l + 1) * d].to_vec();
                let mut out = Vec::with_capacity(count - 1);
                for i in 1..count {
                    x = flow(field, ax, &x, h, substeps).map_err(|e| FieldError::AtNode {
                        node: {
                            let mut nn = node.clone();
                            nn[ax] = i;
                            nn
                        },
                        source: Box::new(e),
                    })?;
                    node[ax] = i;
                    out.push((node.clone(), x.clone()));
                }
                Ok(out)
            })
            .collect();
        let mut next = known.clone();
        for line in lines {
            for (node, x) in line? {
                let l = grid.linear(&node);
                values[l * d..(l + 1) * d].copy_from_slice(&x);
                next.push(node);
            }
        }
        known = next;
    }
    FieldSection::new(chart, grid.clone(), values)
}

/// max_{A<B} |Fl_A o Fl_B (x) - Fl_B o Fl_A (x)| / h^2.
pub fn commutation_defect(
    field: &dyn KVectorField,
    x: &ChartPoint,
    h: f64,
    substeps: usize,
) -> Result<f64> {
    let k = field.chart().k;
    let mut worst = 0.0f64;
    for a in 0..k {
        for b in a + 1..k {
            let ab = flow(field, a, &flow(field, b, &x.values, h, substeps)?, h, substeps)?;
            let ba = flow(field, b, &flow(field, a, &x.values, h, substeps)?, h, substeps)?;
            let diff: f64 = ab.iter().zip(&ba).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
            worst = worst.max(diff / (h * h));
        }
    }
    Ok(worst)
}

/// Finite-difference first and second derivatives of every chart coordinate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JetRecord {
    pub k: usize,
    pub node: Vec<usize>,
    pub t: Vec<f64>,
    pub values: Vec<f64>,
    /// d x^s / dt^A at `s*k + A`
    pub first: Vec<f64>,
    /// d2 x^s / dt^A dt^B at `(s*k + A)*k + B`
    pub second: Vec<f64>,
}

impl JetRecord {
    pub fn first(&self, slot: usize, a: usize) -> f64 {
        self.first[slot * self.k + a]
    }

    pub fn second(&self, slot: usize, a: usize, b: usize) -> f64 {
        self.second[(slot * self.k + a) * self.k + b]
    }
}

type Stencil = Vec<(isize, f64)>;

/// Second-order first-derivative stencil at index `i` of `c` nodes.
fn first_stencil(i: usize, c: usize, h: f64) -> Stencil {
    let w = 1.0 / (2.0 * h);
    if i == 0 {
        vec![(0, -3.0 * w), (1, 4.0 * w), (2, -w)]
    } else if i + 1 == c {
        vec![(0, 3.0 * w), (-1, -4.0 * w), (-2, w)]
    } else {
        vec![(1, w), (-1, -w)]
    }
}

fn second_stencil(i: usize, c: usize, h: f64) -> Stencil {
    let w = 1.0 / (h * h);
    let interior = i > 0 && i + 1 < c;
    if interior {
        return vec![(1, w), (0, -2.0 * w), (-1, w)];
    }
    let s: isize = if i == 0 { 1 } else { -1 };
    if c >= 4 {
        vec![(0, 2.0 * w), (s, -5.0 * w), (2 * s, 4.0 * w), (3 * s, -w)]
    } else {
        vec![(0, w), (s, -2.0 * w), (2 * s, w)]
    }
}

fn apply(s: &FieldSection, node: &[usize], terms: &[(Vec<(usize, isize)>, f64)], out: &mut [f64]) {
    let d = s.chart.dim();
    out.iter_mut().for_each(|v| *v = 0.0);
    let mut at = node.to_vec();
    for (shifts, w) in terms {
        at.copy_from_slice(node);
        for &(ax, off) in shifts {
            at[ax] = (node[ax] as isize + off) as usize;
        }
        let x = s.node(&at);
        for j in 0..d {
            out[j] += w * x[j];
        }
    }
}

fn jet_with(s: &FieldSection, node: &[usize], first: impl Fn(usize) -> Stencil, second: impl Fn(usize) -> Stencil) -> JetRecord {
    let k = s.chart.k;
    let d = s.chart.dim();
    let mut rec = JetRecord {
        k,
        node: node.to_vec(),
        t: s.grid.time_of(node),
        values: s.node(node).to_vec(),
        first: vec![0.0; d * k],
        second: vec![0.0; d * k * k],
    };
    let mut buf = vec![0.0; d];
    for a in 0..k {
        let terms: Vec<_> = first(a).into_iter().map(|(o, w)| (vec![(a, o)], w)).collect();
        apply(s, node, &terms, &mut buf);
        for j in 0..d {
            rec.first[j * k + a] = buf[j];
        }
        for b in a..k {
            let terms: Vec<_> = if a == b {
                second(a).into_iter().map(|(o, w)| (vec![(a, o)], w)).collect()
            } else {
                let sa = first(a);
                let sb = first(b);
                sa.iter()
                    .flat_map(|&(oa, wa)| sb.iter().map(move |&(ob, wb)| (vec![(a, oa), (b, ob)], wa * wb)))
                    .collect()
            };
            apply(s, node, &terms, &mut buf);
            for j in 0..d {
                rec.second[(j * k + a) * k + b] = buf[j];
                rec.second[(j * k + b) * k + a] = buf[j];
            }
        }
    }
    rec
}

/// Central-difference jet at an interior node.
pub fn second_jet(s: &FieldSection, node: &[usize]) -> Result<JetRecord> {
    if node.len() != s.chart.k || node.iter().zip(&s.grid.counts).any(|(&i, &c)| i >= c) {
        return Err(FieldError::ShapeMismatch(format!("node {node:?} is not on the grid")));
    }
    if !s.grid.is_interior(node) {
        return Err(FieldError::BoundaryNode { node: node.to_vec() });
    }
    let g = &s.grid;
    Ok(jet_with(
        s,
        node,
        |a| first_stencil(node[a], g.counts[a], g.spacing[a]),
        |a| second_stencil(node[a], g.counts[a], g.spacing[a]),
    ))
}

/// Jet at any node: central stencils inside, one-sided ones on the boundary.
pub fn jet_at(s: &FieldSection, node: &[usize]) -> Result<JetRecord> {
    if node.len() != s.chart.k || node.iter().zip(&s.grid.counts).any(|(&i, &c)| i >= c) {
        return Err(FieldError::ShapeMismatch(format!("node {node:?} is not on the grid")));
    }
    let g = &s.grid;
    Ok(jet_with(
        s,
        node,
        |a| first_stencil(node[a], g.counts[a], g.spacing[a]),
        |a| second_stencil(node[a], g.counts[a], g.spacing[a]),
    ))
}
