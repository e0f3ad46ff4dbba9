//! Reference test errors of the six tables, cell by cell.

use invnet::discretize::Problem;

use crate::analysis::{CellKey, CellStats};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceRow {
    /// Table number, 1 to 6.
    pub table: u8,
    pub problem: Problem,
    pub d: usize,
    pub samples: usize,
    pub delta: f64,
    pub mse: f64,
}

impl ReferenceRow {
    pub fn key(&self) -> CellKey {
        CellKey::new(self.problem, self.d, self.samples, self.delta)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTable {
    pub rows: Vec<ReferenceRow>,
}

/// Columns run along D (fixed d) or along d (fixed D).
enum Columns {
    Samples { d: usize, values: &'static [usize] },
    Dims { samples: usize, values: &'static [usize] },
}

struct Source {
    table: u8,
    problem: Problem,
    columns: Columns,
    rows: &'static [(f64, &'static [f64])],
}

const D_GRID: &[usize] = &[20, 40, 60, 80, 100, 120, 140, 160];

const SOURCES: &[Source] = &[
    Source {
        table: 1,
        problem: Problem::Transmissivity,
        columns: Columns::Samples { d: 4, values: D_GRID },
        rows: &[
            (0.0, &[3.02e-5, 1.08e-5, 7.86e-6, 4.27e-6, 5.49e-6, 4.14e-6, 3.59e-6, 5.27e-6]),
            (0.005, &[1.79e-4, 9.53e-5, 6.70e-5, 5.88e-5, 5.48e-5, 4.07e-5, 3.25e-5, 3.52e-5]),
            (0.01, &[3.73e-4, 2.03e-4, 1.49e-4, 1.30e-4, 9.98e-5, 8.87e-5, 6.59e-5, 6.60e-5]),
            (0.02, &[7.20e-4, 2.90e-4, 2.18e-4, 1.68e-4, 1.51e-4, 1.23e-4, 1.00e-4, 1.03e-4]),
            (0.03, &[1.48e-3, 8.77e-4, 6.55e-4, 5.17e-4, 4.54e-4, 3.80e-4, 2.99e-4, 3.00e-4]),
        ],
    },
    Source {
        table: 2,
        problem: Problem::Transmissivity,
        columns: Columns::Dims { samples: 100, values: &[4, 8, 12, 16, 20] },
        rows: &[
            (0.0, &[1.20e-6, 9.93e-6, 3.33e-5, 1.06e-4, 1.16e-4]),
            (0.005, &[1.52e-5, 9.94e-5, 2.64e-4, 4.73e-4, 7.97e-4]),
            (0.008, &[2.97e-5, 1.88e-4, 4.65e-4, 8.11e-4, 1.18e-2]),
            (0.01, &[4.75e-5, 2.51e-4, 5.90e-4, 1.02e-3, 1.30e-3]),
            (0.02, &[1.31e-4, 6.33e-4, 1.26e-3, 1.81e-3, 1.91e-3]),
        ],
    },
    Source {
        table: 3,
        problem: Problem::EulerBernoulli,
        columns: Columns::Samples { d: 4, values: D_GRID },
        rows: &[
            (0.0, &[5.90e-5, 6.28e-5, 8.31e-5, 8.69e-5, 7.50e-5, 1.02e-4, 1.57e-4, 9.52e-5]),
            (0.005, &[3.95e-4, 3.25e-4, 2.74e-4, 2.22e-4, 2.11e-4, 2.51e-4, 1.69e-4, 1.70e-4]),
            (0.008, &[6.24e-4, 4.75e-4, 3.48e-4, 3.45e-4, 3.27e-4, 3.67e-4, 3.84e-4, 2.98e-4]),
            (0.01, &[1.17e-3, 5.66e-4, 5.14e-4, 5.48e-4, 3.56e-4, 3.88e-4, 3.50e-4, 3.85e-4]),
            (0.02, &[2.11e-3, 1.71e-3, 1.15e-2, 1.39e-3, 1.02e-3, 8.63e-4, 9.25e-4, 1.03e-3]),
        ],
    },
    Source {
        table: 4,
        problem: Problem::Volterra,
        columns: Columns::Samples { d: 4, values: D_GRID },
        rows: &[
            (0.0, &[5.46e-6, 4.39e-6, 4.72e-6, 5.85e-6, 5.80e-6, 4.69e-6, 5.72e-6, 6.73e-6]),
            (0.005, &[2.23e-4, 1.05e-4, 7.88e-5, 7.52e-5, 5.50e-5, 4.50e-5, 3.64e-5, 3.65e-5]),
            (0.008, &[6.14e-4, 3.35e-4, 2.51e-4, 1.93e-4, 1.88e-4, 1.37e-4, 1.11e-4, 1.10e-4]),
            (0.01, &[1.19e-3, 6.63e-4, 4.85e-4, 3.77e-4, 3.30e-4, 2.74e-4, 2.20e-4, 2.13e-4]),
            (0.02, &[1.86e-3, 1.06e-3, 7.74e-4, 6.23e-4, 5.13e-4, 4.35e-4, 3.50e-4, 3.38e-4]),
        ],
    },
    Source {
        table: 5,
        problem: Problem::Volterra,
        columns: Columns::Samples { d: 8, values: D_GRID },
        rows: &[
            (0.0, &[5.62e-5, 7.07e-5, 5.58e-5, 1.11e-5, 9.60e-5, 8.32e-5, 7.90e-5, 6.93e-5]),
            (0.005, &[2.48e-4, 1.98e-4, 1.49e-4, 1.66e-4, 1.49e-4, 1.45e-4, 1.23e-4, 1.36e-4]),
            (0.008, &[5.28e-5, 3.29e-4, 2.85e-4, 2.63e-4, 2.05e-4, 1.96e-4, 1.47e-4, 1.92e-4]),
            (0.01, &[7.01e-4, 4.60e-4, 3.69e-4, 3.15e-4, 3.07e-4, 2.56e-4, 2.06e-4, 2.09e-4]),
            (0.02, &[2.05e-3, 1.25e-3, 9.10e-4, 7.72e-4, 7.25e-4, 6.37e-4, 4.95e-4, 4.77e-4]),
        ],
    },
    Source {
        table: 6,
        problem: Problem::Gravimetric,
        columns: Columns::Samples { d: 4, values: &[8, 12, 16, 20, 24, 36, 40] },
        rows: &[
            (0.0, &[2.50e-5, 2.74e-5, 2.68e-5, 2.94e-5, 2.83e-5, 2.66e-5, 2.16e-5]),
            (1e-5, &[2.87e-4, 1.89e-4, 1.53e-4, 1.23e-4, 1.13e-4, 8.33e-5, 8.22e-5]),
            (1e-4, &[5.31e-3, 4.5e-3, 3.77e-3, 3.46e-3, 3.28e-3, 2.63e-3, 2.43e-3]),
            (1e-3, &[1.64e-2, 1.61e-2, 1.50e-2, 1.52e-2, 1.49e-2, 1.39e-2, 1.40e-2]),
        ],
    },
];

impl ReferenceTable {
    /// All reference cells.
    pub fn builtin() -> Self {
        let mut rows = Vec::new();
        for src in SOURCES {
            for &(delta, values) in src.rows {
                let (fixed, cols) = match src.columns {
                    Columns::Samples { d, values } => (d, values),
                    Columns::Dims { samples, values } => (samples, values),
                };
                assert_eq!(values.len(), cols.len());
                for (&c, &mse) in cols.iter().zip(values) {
                    let (d, samples) = match src.columns {
                        Columns::Samples { .. } => (fixed, c),
                        Columns::Dims { .. } => (c, fixed),
                    };
                    rows.push(ReferenceRow { table: src.table, problem: src.problem, d, samples, delta, mse });
                }
            }
        }
        Self { rows }
    }

    pub fn table(&self, table: u8) -> Self {
        Self { rows: self.rows.iter().filter(|r| r.table == table).copied().collect() }
    }

    /// Rows whose cell is in `keys`.
    pub fn restricted(&self, keys: &[CellKey]) -> Self {
        Self { rows: self.rows.iter().filter(|r| keys.contains(&r.key())).copied().collect() }
    }

    /// The reference values as single-run cell statistics.
    pub fn as_stats(&self) -> Vec<CellStats> {
        self.rows
            .iter()
            .map(|r| CellStats { key: r.key(), mean: r.mse, std: 0.0, runs: 1, failed: 0 })
            .collect()
    }
}
