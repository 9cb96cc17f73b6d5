//! Exact-span scoring and the experiment grid.

mod grid;
mod report;
mod score;

pub use grid::{
    grid_rows, run_cell, run_grid, Ablation, CellReport, GridBase, GridDataset, GridReport, GridRow, GridSpec,
    MeanScores, RowReport, SeedFailure, SeedResult,
};
pub use report::render_grid_table;
pub use score::{score, score_labels, EvalReport};
