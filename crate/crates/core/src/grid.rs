//! Uniform midpoint grid on `[0, 1]` and densities tabulated on it.
//!
//! Every integral in the crate is the midpoint rule on this grid: node `i`
//! (0-based) sits at `(i + 1/2) / m` and carries weight `1/m`. A
//! [`GridDensity`] is therefore a vector of nodal values whose weighted sum
//! is one. Keeping all evaluations nodal means beta kernels with a pole at
//! an endpoint never get evaluated there.

use std::io::{Read, Write};
use std::sync::Arc;

use crate::error::{Error, Result};

/// Floor used by the family constructors before likelihood work.
pub const DEFAULT_FLOOR: f64 = 1e-10;

/// Default number of cells.
pub const DEFAULT_M: usize = 1024;

#[derive(Clone, Debug)]
pub struct Grid {
    nodes: Arc<[f64]>,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.m() == other.m()
    }
}

impl Eq for Grid {}

impl Grid {
    pub fn new(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::GridTooSmall { m });
        }
        let mf = m as f64;
        let nodes = (0..m).map(|i| (i as f64 + 0.5) / mf).collect();
        Ok(Self { nodes })
    }

    pub fn m(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Cell measure, identical for every node.
    pub fn weight(&self) -> f64 {
        1.0 / self.m() as f64
    }

    /// Index of the cell containing `x`; the right endpoint belongs to the last cell.
    pub fn cell_of(&self, x: f64) -> usize {
        let i = (x * self.m() as f64).floor();
        if i <= 0.0 {
            0
        } else {
            (i as usize).min(self.m() - 1)
        }
    }

    /// Midpoint-rule integral of nodal values.
    pub fn integrate(&self, h: &[f64]) -> Result<f64> {
        if h.len() != self.m() {
            return Err(Error::LengthMismatch {
                expected: self.m(),
                got: h.len(),
            });
        }
        let mut sum = 0.0;
        for (node, &v) in h.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::BadValue { node, value: v });
            }
            sum += v;
        }
        Ok(sum * self.weight())
    }

    /// Integral of a function evaluated at the nodes.
    pub fn integrate_fn(&self, h: impl Fn(f64) -> f64) -> Result<f64> {
        let values: Vec<f64> = self.nodes.iter().map(|&x| h(x)).collect();
        self.integrate(&values)
    }

    pub(crate) fn check_same(&self, other: &Grid) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch {
                left: self.m(),
                right: other.m(),
            });
        }
        Ok(())
    }
}

/// A probability density on a [`Grid`], stored as nodal values.
///
/// Values never drop below `floor`, and the midpoint integral is one.
#[derive(Clone, Debug)]
pub struct GridDensity {
    grid: Grid,
    values: Vec<f64>,
    floor: f64,
    clamped: bool,
}

impl GridDensity {
    /// Clamps `values` below at `floor`, then rescales to unit integral.
    ///
    /// The stored floor is the requested one divided by the normalizing
    /// constant, so the value invariant survives the rescale.
    pub fn normalize(values: Vec<f64>, grid: &Grid, floor: f64) -> Result<Self> {
        if values.len() != grid.m() {
            return Err(Error::LengthMismatch {
                expected: grid.m(),
                got: values.len(),
            });
        }
        if !(floor >= 0.0 && floor.is_finite()) {
            return Err(Error::InvalidArgument(format!("floor must be finite and >= 0, got {floor}")));
        }
        let mut values = values;
        let mut clamped = false;
        for (node, v) in values.iter_mut().enumerate() {
            if !v.is_finite() || *v < 0.0 {
                return Err(Error::BadValue { node, value: *v });
            }
            if *v < floor {
                *v = floor;
                clamped = true;
            }
        }
        let total = grid.integrate(&values)?;
        if total <= 0.0 {
            return Err(Error::AllZero);
        }
        for v in values.iter_mut() {
            *v /= total;
        }
        Ok(Self {
            grid: grid.clone(),
            values,
            floor: floor / total,
            clamped,
        })
    }

    pub fn uniform(grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![1.0; grid.m()],
            floor: 0.0,
            clamped: false,
        }
    }

    /// Tabulates `f` at the nodes and normalizes.
    pub fn from_fn(grid: &Grid, floor: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes().iter().map(|&x| f(x)).collect();
        Self::normalize(values, grid, floor)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, node: usize) -> f64 {
        self.values[node]
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    /// Whether the floor lifted any input value during construction.
    pub fn clamped(&self) -> bool {
        self.clamped
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.weight()
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.values.iter().all(|&v| v > 0.0)
    }

    /// Writes `node,value` rows with a header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["node", "value"])?;
        for (x, v) in self.grid.nodes().iter().zip(&self.values) {
            w.write_record([x.to_string(), v.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// Reads `node,value` rows; the grid is rebuilt from the row count and the
    /// values go back through [`GridDensity::normalize`].
    pub fn read_csv<R: Read>(input: R, floor: f64) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "node" || &headers[1] != "value" {
            return Err(Error::InvalidSpec(format!(
                "density CSV header must be `node,value`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut nodes = Vec::new();
        let mut values = Vec::new();
        for row in r.records() {
            let row = row?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidSpec(format!("bad number `{s}`: {e}")))
            };
            nodes.push(parse(&row[0])?);
            values.push(parse(&row[1])?);
        }
        let grid = Grid::new(nodes.len())?;
        for (i, (&x, &expected)) in nodes.iter().zip(grid.nodes()).enumerate() {
            if (x - expected).abs() > 1e-9 {
                return Err(Error::InvalidSpec(format!(
                    "row {i}: node {x} is not the midpoint {expected} of a {}-cell grid",
                    grid.m()
                )));
            }
        }
        Self::normalize(values, &grid, floor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoint_layout() {
        let g = Grid::new(2).unwrap();
        assert_eq!(g.nodes(), &[0.25, 0.75]);
        assert_eq!(g.weight(), 0.5);
        let g4 = Grid::new(4).unwrap();
        assert_eq!(g4.nodes()[0], 0.125);
        assert!(matches!(Grid::new(1), Err(Error::GridTooSmall { m: 1 })));
        assert!(Grid::new(0).is_err());
    }

    #[test]
    fn weights_sum_to_one() {
        for m in [2, 3, 7, 1000, 1024, 4097] {
            let g = Grid::new(m).unwrap();
            let total = g.weight() * m as f64;
            assert!((total - 1.0).abs() <= f64::EPSILON);
            assert!(g.nodes().windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn normalize_examples() {
        let g4 = Grid::new(4).unwrap();
        let d = GridDensity::normalize(vec![5.0; 4], &g4, 0.0).unwrap();
        assert!(d.values().iter().all(|&v| (v - 1.0).abs() < 1e-15));

        let g2 = Grid::new(2).unwrap();
        let d = GridDensity::normalize(vec![1.0, 0.0], &g2, 0.0).unwrap();
        assert_eq!(d.values(), &[2.0, 0.0]);
        assert!(!d.clamped());

        // clamp to (1, 1e-8), integral (1 + 1e-8)/2, so values 2/(1+1e-8) and 2e-8/(1+1e-8)
        let d = GridDensity::normalize(vec![1.0, 0.0], &g2, 1e-8).unwrap();
        let z = (1.0 + 1e-8) / 2.0;
        assert!((d.value(0) - 1.0 / z).abs() < 1e-15);
        assert!((d.value(1) - 1e-8 / z).abs() < 1e-22);
        assert!((d.integral() - 1.0).abs() < 1e-12);
        assert!(d.clamped());
        assert!(d.values().iter().all(|&v| v >= d.floor()));
    }

    #[test]
    fn normalize_rejects_bad_input() {
        let g = Grid::new(3).unwrap();
        assert!(matches!(
            GridDensity::normalize(vec![0.0; 3], &g, 0.0),
            Err(Error::AllZero)
        ));
        assert!(GridDensity::normalize(vec![1.0, -1.0, 1.0], &g, 0.0).is_err());
        assert!(GridDensity::normalize(vec![1.0, f64::NAN, 1.0], &g, 0.0).is_err());
        assert!(GridDensity::normalize(vec![1.0; 2], &g, 0.0).is_err());
    }

    #[test]
    fn integrate_examples() {
        let g = Grid::new(10).unwrap();
        assert!((g.integrate(&[1.0; 10]).unwrap() - 1.0).abs() < 1e-15);
        let g = Grid::new(1000).unwrap();
        assert!((g.integrate_fn(|x| x).unwrap() - 0.5).abs() < 1e-6);
        let g = Grid::new(4000).unwrap();
        let exact = 2.0 * 2f64.sqrt() / 3.0;
        assert!((g.integrate_fn(|x| (2.0 * x).sqrt()).unwrap() - exact).abs() < 1e-4);
        let mut h = vec![1.0; 4000];
        h[17] = f64::INFINITY;
        assert!(matches!(g.integrate(&h), Err(Error::BadValue { node: 17, .. })));
    }

    #[test]
    fn cell_lookup() {
        let g = Grid::new(4).unwrap();
        assert_eq!(g.cell_of(0.0), 0);
        assert_eq!(g.cell_of(0.2499), 0);
        assert_eq!(g.cell_of(0.25), 1);
        assert_eq!(g.cell_of(1.0), 3);
    }

    #[test]
    fn csv_reload_keeps_density() {
        let g = Grid::new(16).unwrap();
        let d = GridDensity::from_fn(&g, 0.0, |x| 1.0 + x * x).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("node,value\n"));
        assert_eq!(text.lines().count(), 17);
        let back = GridDensity::read_csv(buf.as_slice(), 0.0).unwrap();
        assert_eq!(back.grid().m(), 16);
        for (a, b) in back.values().iter().zip(d.values()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn csv_rejects_wrong_header() {
        let text = "x,y\n0.25,1\n0.75,1\n";
        assert!(GridDensity::read_csv(text.as_bytes(), 0.0).is_err());
    }
}
