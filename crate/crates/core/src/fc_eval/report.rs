use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::score::ScoreSet;
use super::{EvalError, ProblemType};

/// Correct-over-count tally. The exact ratio is kept; percentages are derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(into = "CellRepr", try_from = "CellRepr")]
pub struct Cell {
    pub correct: u64,
    pub count: u64,
}

impl Cell {
    pub fn new(correct: u64, count: u64) -> Self {
        assert!(correct <= count, "correct {correct} exceeds count {count}");
        Self { correct, count }
    }

    pub fn record(&mut self, ok: bool) {
        self.count += 1;
        self.correct += u64::from(ok);
    }

    pub fn merge(self, other: Cell) -> Cell {
        Cell { correct: self.correct + other.correct, count: self.count + other.count }
    }

    /// 100 * correct / count; 0 for an empty cell.
    pub fn accuracy(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            100.0 * self.correct as f64 / self.count as f64
        }
    }

    /// Whole-percent display value, rounded half up on the exact ratio.
    pub fn display(&self) -> u64 {
        if self.count == 0 {
            0
        } else {
            (200 * self.correct + self.count) / (2 * self.count)
        }
    }
}

#[derive(Serialize, Deserialize)]
struct CellRepr {
    correct: u64,
    count: u64,
    accuracy: f64,
    display: u64,
}

impl From<Cell> for CellRepr {
    fn from(c: Cell) -> Self {
        CellRepr { correct: c.correct, count: c.count, accuracy: c.accuracy(), display: c.display() }
    }
}

impl TryFrom<CellRepr> for Cell {
    type Error = String;

    fn try_from(r: CellRepr) -> Result<Self, String> {
        if r.correct > r.count {
            return Err(format!("correct {} exceeds count {}", r.correct, r.count));
        }
        let c = Cell { correct: r.correct, count: r.count };
        if c.accuracy() != r.accuracy || c.display() != r.display {
            return Err("stored percentages disagree with correct/count".into());
        }
        Ok(c)
    }
}

/// Leaderboard-style summary. Cells with no instances are omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall: Cell,
    #[serde(default)]
    pub ast: BTreeMap<ProblemType, Cell>,
    #[serde(default)]
    pub exec: BTreeMap<ProblemType, Cell>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relevance: Option<Cell>,
}

/// Column order of the rendered table.
pub const TABLE_COLUMNS: [&str; 10] =
    ["Overall", "AST S.", "AST M.", "AST P.", "AST P.M.", "Exec S.", "Exec M.", "Exec P.", "Exec P.M.", "Relevance"];

/// Pools the scored components. Overall accuracy is the instance-level ratio
/// over every scored instance.
pub fn aggregate_report(
    ast: Option<&ScoreSet>,
    exec: Option<&ScoreSet>,
    relevance: Option<Cell>,
) -> Result<EvalReport, EvalError> {
    let nonempty = |cells: &BTreeMap<ProblemType, Cell>| -> BTreeMap<ProblemType, Cell> {
        cells.iter().filter(|(_, c)| c.count > 0).map(|(k, c)| (*k, *c)).collect()
    };
    let ast = ast.map(|s| nonempty(&s.cells)).unwrap_or_default();
    let exec = exec.map(|s| nonempty(&s.cells)).unwrap_or_default();
    let relevance = relevance.filter(|c| c.count > 0);

    let overall = ast.values().chain(exec.values()).chain(relevance.iter()).fold(Cell::default(), |a, c| a.merge(*c));
    if overall.count == 0 {
        return Err(EvalError::EmptyRun);
    }
    Ok(EvalReport { overall, ast, exec, relevance })
}

impl EvalReport {
    /// Display values in [`TABLE_COLUMNS`] order; `None` where no instance was scored.
    pub fn row(&self) -> [Option<u64>; 10] {
        let mut row = [None; 10];
        row[0] = Some(self.overall.display());
        for (i, pt) in ProblemType::ALL.iter().enumerate() {
            row[1 + i] = self.ast.get(pt).map(Cell::display);
            row[5 + i] = self.exec.get(pt).map(Cell::display);
        }
        row[9] = self.relevance.map(|c| c.display());
        row
    }

    /// Plain-text table: overall, AST S./M./P./P.M., Exec S./M./P./P.M., relevance.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>8} | {:^27} | {:^27} | {:>9}",
            "Overall", "AST Accuracy", "Executable Accuracy", "Relevance"
        );
        let sub = ProblemType::ALL.iter().map(|p| format!("{:>6}", p.abbrev())).collect::<Vec<_>>().join("");
        let _ = writeln!(out, "{:>8} | {:>27} | {:>27} | {:>9}", "Accuracy", sub, sub, "Detection");
        let _ = writeln!(out, "{}", "-".repeat(8 + 3 + 27 + 3 + 27 + 3 + 9));
        let cell = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_else(|| "-".into());
        let row = self.row();
        let group = |r: &[Option<u64>]| r.iter().map(|v| format!("{:>6}", cell(*v))).collect::<Vec<_>>().join("");
        let _ = writeln!(
            out,
            "{:>8} | {:>27} | {:>27} | {:>9}",
            cell(row[0]),
            group(&row[1..5]),
            group(&row[5..9]),
            cell(row[9])
        );
        out
    }
}
