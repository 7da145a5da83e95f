//! Grid-sampled surfaces and their plain-text file format.
//!
//! A grid surface is piecewise constant on the half-open node cells
//! `[s_i, s_{i+1}) x [x_j, x_{j+1})`, taking the sampled value at the
//! lower-left node, so it is cadlag in each variable and its left limits
//! are exact lookups.
//!
//! File format (whitespace separated, `#` comment lines allowed):
//!
//! ```text
//! s_count x_count s_lo s_hi x_lo x_hi
//! v(0,0) v(0,1) ... v(0,x_count-1)
//! v(1,0) ...
//! ```
//!
//! Values are row-major with the time index `s` as the row. Node
//! coordinates are uniform over the declared ranges.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::Bv2dError;

/// Sampled values on a rectangular node set, strictly increasing per axis.
#[derive(Debug, Clone)]
pub struct GridData {
    s_nodes: Vec<f64>,
    x_nodes: Vec<f64>,
    /// Row-major values, `values[i * x_nodes.len() + j]` at `(s_i, x_j)`.
    values: Vec<f64>,
}

impl GridData {
    pub fn from_nodes(
        s_nodes: Vec<f64>,
        x_nodes: Vec<f64>,
        values: Vec<f64>,
    ) -> Result<Self, Bv2dError> {
        if s_nodes.len() < 2 || x_nodes.len() < 2 {
            return Err(Bv2dError::GridFormat("need at least 2 nodes per axis".into()));
        }
        for axis in [&s_nodes, &x_nodes] {
            for w in axis.windows(2) {
                let increasing = w[1] > w[0];
                if !increasing {
                    return Err(Bv2dError::GridFormat(format!(
                        "nodes not strictly increasing at {} -> {}",
                        w[0], w[1]
                    )));
                }
            }
        }
        if values.len() != s_nodes.len() * x_nodes.len() {
            return Err(Bv2dError::GridFormat(format!(
                "expected {} values, got {}",
                s_nodes.len() * x_nodes.len(),
                values.len()
            )));
        }
        Ok(GridData { s_nodes, x_nodes, values })
    }

    /// Uniform node coordinates over the given ranges.
    pub fn uniform(
        s_count: usize,
        x_count: usize,
        s_range: (f64, f64),
        x_range: (f64, f64),
        values: Vec<f64>,
    ) -> Result<Self, Bv2dError> {
        if s_count < 2 || x_count < 2 {
            return Err(Bv2dError::GridFormat("need at least 2 nodes per axis".into()));
        }
        let lin = |n: usize, (lo, hi): (f64, f64)| -> Vec<f64> {
            (0..n)
                .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                .collect()
        };
        GridData::from_nodes(lin(s_count, s_range), lin(x_count, x_range), values)
    }

    pub fn s_nodes(&self) -> &[f64] {
        &self.s_nodes
    }

    pub fn x_nodes(&self) -> &[f64] {
        &self.x_nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Index of the cell containing `c`: largest `i` with `nodes[i] <= c`,
    /// clamped to valid cells.
    fn cell_index(nodes: &[f64], c: f64) -> usize {
        let n = nodes.len();
        match nodes.binary_search_by(|p| p.partial_cmp(&c).unwrap()) {
            Ok(i) => i.min(n - 1),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 1),
        }
    }

    /// Index seen by a limit from below: largest `i` with `nodes[i] < c`.
    fn cell_index_left(nodes: &[f64], c: f64) -> usize {
        let i = nodes.partition_point(|&p| p < c);
        i.saturating_sub(1)
    }

    pub fn value(&self, s: f64, x: f64) -> f64 {
        let i = Self::cell_index(&self.s_nodes, s);
        let j = Self::cell_index(&self.x_nodes, x);
        self.values[i * self.x_nodes.len() + j]
    }

    /// Joint limit from below in both variables.
    pub fn value_left(&self, s: f64, x: f64) -> f64 {
        let i = Self::cell_index_left(&self.s_nodes, s);
        let j = Self::cell_index_left(&self.x_nodes, x);
        self.values[i * self.x_nodes.len() + j]
    }

    /// Limit from below in `x` only, at the exact row of `s`.
    pub fn value_section_left(&self, s: f64, x: f64) -> f64 {
        let i = Self::cell_index(&self.s_nodes, s);
        let j = Self::cell_index_left(&self.x_nodes, x);
        self.values[i * self.x_nodes.len() + j]
    }

    /// Parses the plain-text format described at module level.
    pub fn read<R: Read>(reader: R) -> Result<Self, Bv2dError> {
        let mut tokens: Vec<f64> = Vec::new();
        for line in BufReader::new(reader).lines() {
            let line = line?;
            let body = line.split('#').next().unwrap_or("");
            for tok in body.split_whitespace() {
                tokens.push(tok.parse::<f64>().map_err(|e| {
                    Bv2dError::GridFormat(format!("bad number {tok:?}: {e}"))
                })?);
            }
        }
        if tokens.len() < 6 {
            return Err(Bv2dError::GridFormat(
                "missing header: s_count x_count s_lo s_hi x_lo x_hi".into(),
            ));
        }
        let s_count = tokens[0] as usize;
        let x_count = tokens[1] as usize;
        if tokens[0].fract() != 0.0 || tokens[1].fract() != 0.0 {
            return Err(Bv2dError::GridFormat("counts must be integers".into()));
        }
        let expected = s_count
            .checked_mul(x_count)
            .ok_or_else(|| Bv2dError::GridFormat("count overflow".into()))?;
        let values = tokens[6..].to_vec();
        if values.len() != expected {
            return Err(Bv2dError::GridFormat(format!(
                "expected {expected} values after header, got {}",
                values.len()
            )));
        }
        GridData::uniform(
            s_count,
            x_count,
            (tokens[2], tokens[3]),
            (tokens[4], tokens[5]),
            values,
        )
    }

    pub fn read_file<P: AsRef<Path>>(path: P) -> Result<Self, Bv2dError> {
        GridData::read(std::fs::File::open(path)?)
    }

    /// Writes the plain-text format. Only uniform grids round-trip exactly;
    /// non-uniform node sets are written with their true ranges and a
    /// uniform re-read will not reproduce interior nodes.
    pub fn write<W: Write>(&self, mut w: W) -> Result<(), Bv2dError> {
        writeln!(
            w,
            "{} {} {} {} {} {}",
            self.s_nodes.len(),
            self.x_nodes.len(),
            self.s_nodes[0],
            self.s_nodes.last().unwrap(),
            self.x_nodes[0],
            self.x_nodes.last().unwrap()
        )?;
        let nx = self.x_nodes.len();
        for row in self.values.chunks(nx) {
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cadlag_lookup_semantics() {
        let g = GridData::uniform(3, 3, (0.0, 2.0), (0.0, 2.0), (0..9).map(f64::from).collect())
            .unwrap();
        // value constant on [1,2) x [0,1): node (1,0) -> 3.0
        assert_eq!(g.value(1.0, 0.0), 3.0);
        assert_eq!(g.value(1.5, 0.9), 3.0);
        // left limit at a node sees the previous cell
        assert_eq!(g.value_left(1.0, 1.0), 0.0);
        assert_eq!(g.value(1.0, 1.0), 4.0);
        // left in x only keeps the exact row
        assert_eq!(g.value_section_left(1.0, 1.0), 3.0);
    }

    #[test]
    fn file_round_trip() {
        let g = GridData::uniform(
            4,
            3,
            (0.0, 1.5),
            (-1.0, 1.0),
            (0..12).map(|i| i as f64 * 0.25).collect(),
        )
        .unwrap();
        let mut buf = Vec::new();
        g.write(&mut buf).unwrap();
        let back = GridData::read(&buf[..]).unwrap();
        assert_eq!(back.s_nodes(), g.s_nodes());
        assert_eq!(back.x_nodes(), g.x_nodes());
        assert_eq!(back.values(), g.values());
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(GridData::read("2 2 0 1 0".as_bytes()).is_err());
        assert!(GridData::read("2 2 0 1 0 1\n1 2 3".as_bytes()).is_err());
        assert!(GridData::read("2 2 0 1 0 1\n1 2 3 oops".as_bytes()).is_err());
    }

    #[test]
    fn comments_and_layout_are_flexible() {
        let text = "# surface\n2 2 0 1 0 1\n1 2\n3 4 # trailing\n";
        let g = GridData::read(text.as_bytes()).unwrap();
        assert_eq!(g.values(), &[1.0, 2.0, 3.0, 4.0]);
    }
}
