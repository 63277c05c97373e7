//! Discrete tabular data and contingency tables.

use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;
use std::path::Path;

use rand::seq::index;

use crate::error::{Error, Result};
use crate::graph::Triplet;
use crate::seed;

/// Conditioning sets larger than this are tabulated sparsely.
pub const DEFAULT_DENSE_CAP: usize = 12;

/// Upper bound on materialized cells for a dense table, whatever the cap.
const DENSE_CELL_LIMIT: u128 = 1 << 24;

/// Integer-coded discrete samples, stored column-major.
///
/// Codes in column `j` lie in `0..arities[j]`. The original category labels
/// are kept so the data can be written back out unchanged.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    names: Vec<String>,
    arities: Vec<usize>,
    labels: Vec<Vec<String>>,
    columns: Vec<Vec<u32>>,
    rows: usize,
}

impl Dataset {
    /// Builds a dataset from coded columns. Labels default to the codes.
    pub fn from_columns(
        names: Vec<String>,
        arities: Vec<usize>,
        columns: Vec<Vec<u32>>,
    ) -> Result<Self> {
        if names.len() != arities.len() || names.len() != columns.len() {
            return Err(Error::InvalidArgument(format!(
                "{} names, {} arities and {} columns",
                names.len(),
                arities.len(),
                columns.len()
            )));
        }
        let rows = columns.first().map_or(0, Vec::len);
        for (j, col) in columns.iter().enumerate() {
            if arities[j] == 0 {
                return Err(Error::InvalidArgument(format!("variable {j} has arity 0")));
            }
            if col.len() != rows {
                return Err(Error::InvalidArgument(format!(
                    "column {j} has {} rows, expected {rows}",
                    col.len()
                )));
            }
            if let Some(&bad) = col.iter().find(|&&c| c as usize >= arities[j]) {
                return Err(Error::InvalidArgument(format!(
                    "code {bad} in column {j} exceeds arity {}",
                    arities[j]
                )));
            }
        }
        let labels = arities
            .iter()
            .map(|&a| (0..a).map(|c| c.to_string()).collect())
            .collect();
        Ok(Dataset {
            names,
            arities,
            labels,
            columns,
            rows,
        })
    }

    /// Reads comma-separated text with a mandatory header row.
    ///
    /// Categories are coded densely in order of first appearance per column.
    pub fn from_reader(reader: impl BufRead) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let (names, width) = loop {
            let Some((i, line)) = lines.next() else {
                return Err(Error::parse(1, "missing header"));
            };
            let line = line.map_err(|e| Error::parse(i + 1, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let names: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
            if let Some(pos) = names.iter().position(String::is_empty) {
                return Err(Error::parse(i + 1, format!("empty name for column {pos}")));
            }
            let mut seen = std::collections::HashSet::new();
            if let Some(dup) = names.iter().find(|s| !seen.insert(s.as_str())) {
                return Err(Error::parse(i + 1, format!("duplicate column {dup:?}")));
            }
            let width = names.len();
            break (names, width);
        };

        let mut codes: Vec<HashMap<String, u32>> = vec![HashMap::new(); width];
        let mut labels: Vec<Vec<String>> = vec![Vec::new(); width];
        let mut columns: Vec<Vec<u32>> = vec![Vec::new(); width];
        let mut rows = 0;
        for (i, line) in lines {
            let line_no = i + 1;
            let line = line.map_err(|e| Error::parse(line_no, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != width {
                return Err(Error::parse(
                    line_no,
                    format!("expected {width} fields, found {}", fields.len()),
                ));
            }
            for (j, field) in fields.into_iter().enumerate() {
                if field.is_empty() {
                    return Err(Error::parse(line_no, format!("empty field in column {j}")));
                }
                if field.parse::<f64>().is_ok_and(|v| !v.is_finite()) {
                    return Err(Error::parse(
                        line_no,
                        format!("non-finite value {field:?} in column {j}"),
                    ));
                }
                let next = codes[j].len() as u32;
                let code = *codes[j].entry(field.to_string()).or_insert_with(|| {
                    labels[j].push(field.to_string());
                    next
                });
                columns[j].push(code);
            }
            rows += 1;
        }
        if rows == 0 {
            return Err(Error::EmptyDataset);
        }
        let arities = labels.iter().map(Vec::len).collect();
        Ok(Dataset {
            names,
            arities,
            labels,
            columns,
            rows,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Dataset::from_reader(std::io::BufReader::new(file))
    }

    /// Loads data and widens arities according to a `name:arity` sidecar.
    pub fn load_with_schema(path: impl AsRef<Path>, schema: impl AsRef<Path>) -> Result<Self> {
        let data = Dataset::load(path)?;
        let schema = schema.as_ref();
        let text = std::fs::read_to_string(schema).map_err(|e| Error::io(schema, e))?;
        data.with_schema(&text)
    }

    /// Applies `name:arity` declarations. Declared arities may exceed the
    /// observed number of categories but never fall below it.
    pub fn with_schema(mut self, schema: &str) -> Result<Self> {
        for (i, line) in schema.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (name, arity) = line
                .rsplit_once(':')
                .ok_or_else(|| Error::parse(i + 1, "expected `name:arity`"))?;
            let arity: usize = arity
                .trim()
                .parse()
                .map_err(|_| Error::parse(i + 1, format!("bad arity {arity:?}")))?;
            let j = self
                .names
                .iter()
                .position(|n| n == name.trim())
                .ok_or_else(|| Error::parse(i + 1, format!("unknown variable {name:?}")))?;
            if arity < self.arities[j] {
                return Err(Error::parse(
                    i + 1,
                    format!(
                        "declared arity {arity} for {name:?} but {} categories observed",
                        self.arities[j]
                    ),
                ));
            }
            self.arities[j] = arity;
        }
        Ok(self)
    }

    /// Writes the dataset back as comma-separated text using its labels.
    pub fn to_csv(&self) -> String {
        let mut out = self.names.join(",");
        out.push('\n');
        for r in 0..self.rows {
            let row: Vec<&str> = (0..self.n())
                .map(|j| self.label(j, self.columns[j][r]))
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    fn label(&self, j: usize, code: u32) -> &str {
        // Codes declared by a schema but never observed have no label.
        self.labels[j]
            .get(code as usize)
            .map_or("?", String::as_str)
    }

    /// Number of variables.
    pub fn n(&self) -> usize {
        self.names.len()
    }

    /// Number of rows.
    pub fn len(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn arities(&self) -> &[usize] {
        &self.arities
    }

    pub fn labels(&self, j: usize) -> &[String] {
        &self.labels[j]
    }

    pub fn column(&self, j: usize) -> &[u32] {
        &self.columns[j]
    }

    pub fn row(&self, r: usize) -> Vec<u32> {
        self.columns.iter().map(|c| c[r]).collect()
    }

    /// Uniform sample of `size` rows without replacement. Row order of the
    /// parent is preserved and arities are inherited, never re-inferred.
    pub fn subsample(&self, size: usize, seed: u64) -> Result<Dataset> {
        if size > self.rows {
            return Err(Error::InvalidArgument(format!(
                "subsample of {size} rows from a dataset of {}",
                self.rows
            )));
        }
        let mut picked = index::sample(&mut seed::rng(seed), self.rows, size).into_vec();
        picked.sort_unstable();
        let columns = self
            .columns
            .iter()
            .map(|c| picked.iter().map(|&r| c[r]).collect())
            .collect();
        Ok(Dataset {
            names: self.names.clone(),
            arities: self.arities.clone(),
            labels: self.labels.clone(),
            columns,
            rows: size,
        })
    }

    pub fn contingency_table(&self, t: &Triplet) -> Result<ContingencyTable> {
        self.contingency_table_with_cap(t, DEFAULT_DENSE_CAP)
    }

    /// Tabulates `t` in one pass. Zero slices are materialized only when
    /// `|z| <= dense_cap` and the table is small enough to allocate.
    pub fn contingency_table_with_cap(
        &self,
        t: &Triplet,
        dense_cap: usize,
    ) -> Result<ContingencyTable> {
        t.check_within(self.n())?;
        let (x, y) = (t.x(), t.y());
        let (rx, cy) = (self.arities[x], self.arities[y]);
        let z_arities: Vec<usize> = t.z().iter().map(|&v| self.arities[v]).collect();
        let configs = z_arities
            .iter()
            .try_fold(1u128, |acc, &a| acc.checked_mul(a as u128));
        let dense = t.z().len() <= dense_cap
            && configs.is_some_and(|c| c * (rx * cy) as u128 <= DENSE_CELL_LIMIT);

        let xs = &self.columns[x];
        let ys = &self.columns[y];
        let zs: Vec<&[u32]> = t.z().iter().map(|&v| self.columns[v].as_slice()).collect();
        let block = rx * cy;
        let slices = if dense {
            let configs = configs.unwrap() as usize;
            let mut counts = vec![0u64; configs * block];
            for r in 0..self.rows {
                let mut zi = 0usize;
                for (k, col) in zs.iter().enumerate().rev() {
                    zi = zi * z_arities[k] + col[r] as usize;
                }
                counts[zi * block + xs[r] as usize * cy + ys[r] as usize] += 1;
            }
            Slices::Dense(counts)
        } else {
            let mut map: BTreeMap<Vec<u32>, Vec<u64>> = BTreeMap::new();
            for r in 0..self.rows {
                let key: Vec<u32> = zs.iter().map(|c| c[r]).collect();
                map.entry(key).or_insert_with(|| vec![0; block])
                    [xs[r] as usize * cy + ys[r] as usize] += 1;
            }
            Slices::Sparse(map)
        };
        Ok(ContingencyTable {
            triplet: t.clone(),
            x_arity: rx,
            y_arity: cy,
            z_arities,
            slices,
            total: self.rows as u64,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Slices {
    /// All configurations, first conditioning variable varying fastest.
    Dense(Vec<u64>),
    /// Observed configurations only, keyed by their codes.
    Sparse(BTreeMap<Vec<u32>, Vec<u64>>),
}

/// Counts of `(x, y)` per configuration of the conditioning set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContingencyTable {
    triplet: Triplet,
    x_arity: usize,
    y_arity: usize,
    z_arities: Vec<usize>,
    slices: Slices,
    total: u64,
}

impl ContingencyTable {
    pub fn triplet(&self) -> &Triplet {
        &self.triplet
    }

    pub fn x_arity(&self) -> usize {
        self.x_arity
    }

    pub fn y_arity(&self) -> usize {
        self.y_arity
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Table dimensionality, `2 + |z|`.
    pub fn dimension(&self) -> usize {
        self.triplet.dimension()
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.slices, Slices::Dense(_))
    }

    /// Row-major `x_arity * y_arity` count matrices, one per stored
    /// configuration of the conditioning set.
    pub fn slices(&self) -> Box<dyn Iterator<Item = &[u64]> + '_> {
        let block = self.x_arity * self.y_arity;
        match &self.slices {
            Slices::Dense(counts) => Box::new(counts.chunks(block.max(1))),
            Slices::Sparse(map) => Box::new(map.values().map(Vec::as_slice)),
        }
    }

    /// Count matrix for one configuration of the conditioning set (codes in
    /// the order of `triplet().z()`). Unobserved configurations yield `None`
    /// in sparse tables and a zero matrix in dense ones.
    pub fn slice(&self, z: &[u32]) -> Option<&[u64]> {
        if z.len() != self.z_arities.len()
            || z.iter().zip(&self.z_arities).any(|(&c, &a)| c as usize >= a)
        {
            return None;
        }
        let block = self.x_arity * self.y_arity;
        match &self.slices {
            Slices::Dense(counts) => {
                let zi = z
                    .iter()
                    .zip(&self.z_arities)
                    .rev()
                    .fold(0usize, |acc, (&c, &a)| acc * a + c as usize);
                Some(&counts[zi * block..(zi + 1) * block])
            }
            Slices::Sparse(map) => map.get(z).map(Vec::as_slice),
        }
    }

    pub fn count(&self, z: &[u32], x: u32, y: u32) -> u64 {
        self.slice(z)
            .map_or(0, |s| s[x as usize * self.y_arity + y as usize])
    }
}
