use serde::{Deserialize, Serialize};

use super::chart::{ChartPoint, ChartSpec};
use crate::error::{FieldError, Result};

/// Rectangular grid over a box in R^k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub counts: Vec<usize>,
    pub spacing: Vec<f64>,
    pub origin: Vec<f64>,
}

impl GridSpec {
    /// Counts per axis with spacing chosen to cover [0, 1] on every axis.
    pub fn unit_box(counts: &[usize]) -> GridSpec {
        GridSpec {
            counts: counts.to_vec(),
            spacing: counts.iter().map(|&c| 1.0 / (c.max(2) - 1) as f64).collect(),
            origin: vec![0.0; counts.len()],
        }
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        if self.counts.len() != k || self.spacing.len() != k || self.origin.len() != k {
            return Err(FieldError::InvalidGrid(format!(
                "expected {k} entries for counts, spacing and origin, got {}, {}, {}",
                self.counts.len(),
                self.spacing.len(),
                self.origin.len()
            )));
        }
        if let Some(c) = self.counts.iter().find(|&&c| c < 3) {
            return Err(FieldError::InvalidGrid(format!("node count {c} is below 3")));
        }
        if let Some(h) = self.spacing.iter().find(|h| !(**h > 0.0 && h.is_finite())) {
            return Err(FieldError::InvalidGrid(format!("spacing {h} is not positive")));
        }
        if self.origin.iter().any(|o| !o.is_finite()) {
            return Err(FieldError::InvalidGrid("origin is not finite".into()));
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.counts.iter().product()
    }

    /// Row-major linear index; the last axis varies fastest.
    pub fn linear(&self, node: &[usize]) -> usize {
        let mut idx = 0;
        for (a, &i) in node.iter().enumerate() {
            idx = idx * self.counts[a] + i;
        }
        idx
    }

    pub fn multi(&self, mut linear: usize) -> Vec<usize> {
        let mut node = vec![0; self.counts.len()];
        for a in (0..self.counts.len()).rev() {
            node[a] = linear % self.counts[a];
            linear /= self.counts[a];
        }
        node
    }

    pub fn time_of(&self, node: &[usize]) -> Vec<f64> {
        node.iter()
            .enumerate()
            .map(|(a, &i)| self.origin[a] + i as f64 * self.spacing[a])
            .collect()
    }

    pub fn is_interior(&self, node: &[usize]) -> bool {
        node.iter().zip(&self.counts).all(|(&i, &c)| i > 0 && i + 1 < c)
    }

    pub fn nodes(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.node_count()).map(|l| self.multi(l))
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        self.nodes().filter(|n| self.is_interior(n))
    }
}

/// Discrete section: a chart point at every grid node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSection {
    pub chart: ChartSpec,
    pub grid: GridSpec,
    /// Node-major, `chart.dim()` values per node.
    pub values: Vec<f64>,
}

impl FieldSection {
    pub fn new(chart: ChartSpec, grid: GridSpec, values: Vec<f64>) -> Result<FieldSection> {
        grid.validate(chart.k)?;
        if values.len() != grid.node_count() * chart.dim() {
            return Err(FieldError::DimensionMismatch(format!(
                "section needs {} values, got {}",
                grid.node_count() * chart.dim(),
                values.len()
            )));
        }
        Ok(FieldSection { chart, grid, values })
    }

    /// Samples `f(t)` at every node. `f` returns the full chart vector.
    pub fn from_fn(
        chart: ChartSpec,
        grid: GridSpec,
        mut f: impl FnMut(&[f64]) -> Vec<f64>,
    ) -> Result<FieldSection> {
        grid.validate(chart.k)?;
        let mut values = Vec::with_capacity(grid.node_count() * chart.dim());
        for node in grid.nodes() {
            let x = f(&grid.time_of(&node));
            if x.len() != chart.dim() {
                return Err(FieldError::DimensionMismatch(format!(
                    "node function returned {} values for a chart of dimension {}",
                    x.len(),
                    chart.dim()
                )));
            }
            values.extend(x);
        }
        Ok(FieldSection { chart, grid, values })
    }

    pub fn node(&self, node: &[usize]) -> &[f64] {
        self.at(self.grid.linear(node))
    }

    pub fn at(&self, linear: usize) -> &[f64] {
        let d = self.chart.dim();
        &self.values[linear * d..(linear + 1) * d]
    }

    pub fn point(&self, node: &[usize]) -> ChartPoint {
        ChartPoint { chart: self.chart, values: self.node(node).to_vec() }
    }

    pub fn node_count(&self) -> usize {
        self.grid.node_count()
    }

    /// Applies `f` to every node vector, producing a section on another chart.
    pub fn map(
        &self,
        chart: ChartSpec,
        mut f: impl FnMut(&[f64]) -> Result<Vec<f64>>,
    ) -> Result<FieldSection> {
        let mut values = Vec::with_capacity(self.node_count() * chart.dim());
        for l in 0..self.node_count() {
            let x = f(self.at(l)).map_err(|e| FieldError::AtNode {
                node: self.grid.multi(l),
                source: Box::new(e),
            })?;
            values.extend(x);
        }
        FieldSection::new(chart, self.grid.clone(), values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        let g = GridSpec::unit_box(&[33, 33]);
        assert!(g.validate(2).is_ok());
        assert_eq!(g.spacing, vec![1.0 / 32.0; 2]);
        assert!(GridSpec::unit_box(&[2, 5]).validate(2).is_err());
        assert!(g.validate(1).is_err());
        let mut bad = g.clone();
        bad.spacing[0] = 0.0;
        assert!(bad.validate(2).is_err());
    }

    #[test]
    fn linear_and_multi_are_inverse() {
        let g = GridSpec::unit_box(&[3, 4, 5]);
        for l in 0..g.node_count() {
            assert_eq!(g.linear(&g.multi(l)), l);
        }
        assert_eq!(g.multi(1), vec![0, 0, 1]);
        assert_eq!(g.interior_nodes().count(), 1 * 2 * 3);
    }

    #[test]
    fn from_fn_samples_times() {
        let chart = ChartSpec::lagrangian(2, 1);
        let g = GridSpec::unit_box(&[3, 3]);
        let s = FieldSection::from_fn(chart, g, |t| vec![t[0], t[1], t[0] * t[1], 0.0, 0.0])
            .unwrap();
        assert_eq!(s.node(&[2, 1])[2], 0.5);
        assert_eq!(s.point(&[1, 2]).get("t2").unwrap(), 1.0);
    }
}
