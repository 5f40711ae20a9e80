//! 3x3 grid tasks: a 2x2 box of one symbol, a length-3 line, a plus/X cross,
//! or a right triangle; predicting the box symbol, line head, cross centre,
//! or triangle corner. Background cells hold symbol 0.

use super::vocab::Vocabulary;
use super::{Context, Example};
use crate::error::{Error, Result};
use crate::rng::Stream;

pub const NUM_SYMBOLS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridTask {
    Box_,
    Head,
    Centre,
    Corner,
}

pub const GRID_TASKS: [GridTask; 4] = [GridTask::Box_, GridTask::Head, GridTask::Centre, GridTask::Corner];

impl GridTask {
    pub fn name(&self) -> &'static str {
        match self {
            GridTask::Box_ => "box",
            GridTask::Head => "head",
            GridTask::Centre => "centre",
            GridTask::Corner => "corner",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "box" => Some(GridTask::Box_),
            "head" => Some(GridTask::Head),
            "centre" | "center" => Some(GridTask::Centre),
            "corner" => Some(GridTask::Corner),
            _ => None,
        }
    }
}

/// Declared pattern of a generated grid, used by the geometry oracle and for
/// pre-distractor deduplication.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GridPattern {
    pub task: &'static str,
    /// (row, col, symbol) of every pattern cell, in canonical order; the
    /// first cell is the answer cell for head/centre/corner, any cell for box.
    pub cells: Vec<(usize, usize, u8)>,
}

/// All 8 length-3 lines with their canonical (head-first) direction:
/// rows left to right, columns top to bottom, both diagonals top-down.
pub const LINES: [[(usize, usize); 3]; 8] = [
    [(0, 0), (0, 1), (0, 2)],
    [(1, 0), (1, 1), (1, 2)],
    [(2, 0), (2, 1), (2, 2)],
    [(0, 0), (1, 0), (2, 0)],
    [(0, 1), (1, 1), (2, 1)],
    [(0, 2), (1, 2), (2, 2)],
    [(0, 0), (1, 1), (2, 2)],
    [(0, 2), (1, 1), (2, 0)],
];

/// Right triangles: corner cell first, then the remaining cells of its edge
/// row and edge column, then the centre fill.
pub const TRIANGLES: [[(usize, usize); 6]; 4] = [
    [(0, 0), (0, 1), (0, 2), (1, 0), (2, 0), (1, 1)],
    [(0, 2), (0, 0), (0, 1), (1, 2), (2, 2), (1, 1)],
    [(2, 0), (2, 1), (2, 2), (0, 0), (1, 0), (1, 1)],
    [(2, 2), (2, 0), (2, 1), (0, 2), (1, 2), (1, 1)],
];

/// Plus and X shapes, centre first.
pub const CROSSES: [[(usize, usize); 5]; 2] = [
    [(1, 1), (0, 1), (1, 0), (1, 2), (2, 1)],
    [(1, 1), (0, 0), (0, 2), (2, 0), (2, 2)],
];

/// Top-left anchors of the four 2x2 boxes.
pub const BOX_ANCHORS: [(usize, usize); 4] = [(0, 0), (0, 1), (1, 0), (1, 1)];

fn distinct_symbols(k: usize, stream: &mut Stream) -> Vec<u8> {
    let mut pool: Vec<u8> = (1..=NUM_SYMBOLS as u8).collect();
    stream.shuffle(&mut pool);
    pool.truncate(k);
    pool
}

fn random_pattern(task: GridTask, stream: &mut Stream) -> GridPattern {
    match task {
        GridTask::Box_ => {
            let (r, c) = BOX_ANCHORS[stream.below(4)];
            let sym = (stream.below(NUM_SYMBOLS) + 1) as u8;
            let cells = vec![
                (r, c, sym),
                (r, c + 1, sym),
                (r + 1, c, sym),
                (r + 1, c + 1, sym),
            ];
            GridPattern { task: "box", cells }
        }
        GridTask::Head => {
            let line = LINES[stream.below(LINES.len())];
            let syms = distinct_symbols(3, stream);
            let cells = line.iter().zip(&syms).map(|(&(r, c), &s)| (r, c, s)).collect();
            GridPattern { task: "head", cells }
        }
        GridTask::Centre => {
            let cross = CROSSES[stream.below(2)];
            let syms = distinct_symbols(5, stream);
            let cells = cross.iter().zip(&syms).map(|(&(r, c), &s)| (r, c, s)).collect();
            GridPattern { task: "centre", cells }
        }
        GridTask::Corner => {
            let tri = TRIANGLES[stream.below(4)];
            let syms = distinct_symbols(6, stream);
            let cells = tri.iter().zip(&syms).map(|(&(r, c), &s)| (r, c, s)).collect();
            GridPattern { task: "corner", cells }
        }
    }
}

fn pattern_answer(p: &GridPattern) -> u8 {
    p.cells[0].2
}

fn render(p: &GridPattern, distractors: &[(usize, usize, u8)]) -> [[u8; 3]; 3] {
    let mut g = [[0u8; 3]; 3];
    for &(r, c, s) in p.cells.iter().chain(distractors) {
        g[r][c] = s;
    }
    g
}

fn fully_filled_lines(g: &[[u8; 3]; 3]) -> usize {
    LINES.iter().filter(|line| line.iter().all(|&(r, c)| g[r][c] != 0)).count()
}

fn place_distractors(
    p: &GridPattern,
    task: GridTask,
    stream: &mut Stream,
) -> Vec<(usize, usize, u8)> {
    let count = match task {
        GridTask::Centre => 0,
        GridTask::Box_ => 1,
        GridTask::Head | GridTask::Corner => stream.below(3),
    };
    if count == 0 {
        return vec![];
    }
    let occupied: Vec<(usize, usize)> = p.cells.iter().map(|&(r, c, _)| (r, c)).collect();
    let mut free: Vec<(usize, usize)> = (0..3)
        .flat_map(|r| (0..3).map(move |c| (r, c)))
        .filter(|rc| !occupied.contains(rc))
        .collect();
    stream.shuffle(&mut free);
    let pattern_syms: Vec<u8> = p.cells.iter().map(|&(_, _, s)| s).collect();
    let mut pool: Vec<u8> = (1..=NUM_SYMBOLS as u8).filter(|s| !pattern_syms.contains(s)).collect();
    stream.shuffle(&mut pool);
    let count = count.min(free.len()).min(pool.len());
    let mut out: Vec<(usize, usize, u8)> = (0..count).map(|i| (free[i].0, free[i].1, pool[i])).collect();
    if task == GridTask::Head {
        // A stray distractor must not complete a second full line.
        let base = fully_filled_lines(&render(p, &[]));
        while !out.is_empty() && fully_filled_lines(&render(p, &out)) > base {
            out.pop();
        }
    }
    out
}

/// The geometry oracle: checks that the declared pattern cells are present,
/// that no other non-background cell overlaps them, and returns the answer
/// the task definition assigns to the pattern.
pub fn check_grid(grid: &[[u8; 3]; 3], pattern: &GridPattern) -> Result<u8> {
    for &(r, c, s) in &pattern.cells {
        if grid[r][c] != s {
            return Err(Error::argument(format!(
                "pattern cell ({r},{c}) expected {s}, grid holds {}",
                grid[r][c]
            )));
        }
    }
    let cells: Vec<(usize, usize)> = pattern.cells.iter().map(|&(r, c, _)| (r, c)).collect();
    let dup = cells.iter().collect::<std::collections::HashSet<_>>();
    if dup.len() != cells.len() {
        return Err(Error::argument("pattern declares an overlapping cell".to_string()));
    }
    match pattern.task {
        "box" => {
            let sym = pattern.cells[0].2;
            if pattern.cells.len() != 4 || pattern.cells.iter().any(|&(_, _, s)| s != sym) {
                return Err(Error::argument("box must be four cells of one symbol".to_string()));
            }
            let (r0, c0) = cells.iter().fold((9, 9), |(r, c), &(rr, cc)| (r.min(rr), c.min(cc)));
            let want: Vec<(usize, usize)> =
                vec![(r0, c0), (r0, c0 + 1), (r0 + 1, c0), (r0 + 1, c0 + 1)];
            if !want.iter().all(|rc| cells.contains(rc)) {
                return Err(Error::argument("box cells are not a 2x2 block".to_string()));
            }
            Ok(sym)
        }
        "head" => {
            let line_cells: Vec<(usize, usize)> = cells.clone();
            let line = LINES
                .iter()
                .find(|l| l.iter().zip(&line_cells).all(|(a, b)| a == b))
                .ok_or_else(|| Error::argument("head cells are not a canonical line".to_string()))?;
            Ok(grid[line[0].0][line[0].1])
        }
        "centre" => {
            if cells[0] != (1, 1) {
                return Err(Error::argument("cross centre must be the middle cell".to_string()));
            }
            if !CROSSES.iter().any(|cr| cr.iter().all(|rc| cells.contains(rc))) {
                return Err(Error::argument("cells are neither a plus nor an X".to_string()));
            }
            Ok(grid[1][1])
        }
        "corner" => {
            let tri = TRIANGLES
                .iter()
                .find(|t| t.iter().all(|rc| cells.contains(rc)))
                .ok_or_else(|| Error::argument("cells are not a right triangle".to_string()))?;
            Ok(grid[tri[0].0][tri[0].1])
        }
        other => Err(Error::argument(format!("unknown grid task {other}"))),
    }
}

fn to_example(
    grid: &[[u8; 3]; 3],
    task: GridTask,
    answer: u8,
    vocab: &mut Vocabulary,
) -> Example {
    let mut ctx = [[0usize; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            ctx[r][c] = vocab.intern(&grid[r][c].to_string());
        }
    }
    Example {
        context: Context::Grid(ctx),
        query: vec![vocab.intern(task.name())],
        answer: vocab.intern(&answer.to_string()),
        supports: None,
        task: task.name().to_string(),
    }
}

/// Generate `n` grids for a task; duplicates are keyed on the pre-distractor
/// pattern, keeping the first occurrence.
pub fn gen_grid_with_patterns(
    task: GridTask,
    n: usize,
    vocab: &mut Vocabulary,
    stream: &mut Stream,
) -> Result<Vec<(Example, GridPattern)>> {
    if n == 0 {
        return Err(Error::argument("n must be >= 1"));
    }
    for d in 1..=NUM_SYMBOLS {
        vocab.intern(&d.to_string());
    }
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for _ in 0..n {
        let pattern = random_pattern(task, stream);
        let distractors = place_distractors(&pattern, task, stream);
        if !seen.insert(pattern.clone()) {
            continue;
        }
        let grid = render(&pattern, &distractors);
        let answer = check_grid(&grid, &pattern)?;
        debug_assert_eq!(answer, pattern_answer(&pattern));
        out.push((to_example(&grid, task, answer, vocab), pattern));
    }
    Ok(out)
}

pub fn gen_grid(
    task: GridTask,
    n: usize,
    vocab: &mut Vocabulary,
    stream: &mut Stream,
) -> Result<Vec<Example>> {
    Ok(gen_grid_with_patterns(task, n, vocab, stream)?.into_iter().map(|(e, _)| e).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRng;

    #[test]
    fn corner_oracle_on_triangle_grid() {
        // rows 0 0 3 / 0 1 6 / 8 5 7: right angle at bottom right.
        let grid = [[0, 0, 3], [0, 1, 6], [8, 5, 7]];
        let pattern = GridPattern {
            task: "corner",
            cells: vec![(2, 2, 7), (2, 0, 8), (2, 1, 5), (0, 2, 3), (1, 2, 6), (1, 1, 1)],
        };
        assert_eq!(check_grid(&grid, &pattern).unwrap(), 7);
    }

    #[test]
    fn centre_oracle_on_plus_grid() {
        // rows 0 6 0 / 1 7 2 / 0 3 0: plus with centre 7.
        let grid = [[0, 6, 0], [1, 7, 2], [0, 3, 0]];
        let pattern = GridPattern {
            task: "centre",
            cells: vec![(1, 1, 7), (0, 1, 6), (1, 0, 1), (1, 2, 2), (2, 1, 3)],
        };
        assert_eq!(check_grid(&grid, &pattern).unwrap(), 7);
    }

    #[test]
    fn head_oracle_reads_canonical_direction() {
        // Diagonal 4 7 1 (top-left start) with a distractor 8.
        let grid = [[4, 0, 0], [0, 7, 0], [8, 0, 1]];
        let pattern = GridPattern { task: "head", cells: vec![(0, 0, 4), (1, 1, 7), (2, 2, 1)] };
        assert_eq!(check_grid(&grid, &pattern).unwrap(), 4);
    }

    #[test]
    fn box_unique_patterns_at_most_32() {
        let mut vocab = Vocabulary::new();
        let mut stream = StreamRng::new(11).stream("gen/grid/box");
        let examples = gen_grid(GridTask::Box_, 1000, &mut vocab, &mut stream).unwrap();
        assert!(examples.len() <= 32, "{} unique box patterns", examples.len());
        // 1000 draws over 32 patterns should see all of them.
        assert_eq!(examples.len(), 32);
    }

    #[test]
    fn generated_grids_pass_geometry_oracle() {
        let mut vocab = Vocabulary::new();
        for (i, task) in GRID_TASKS.iter().enumerate() {
            let mut stream = StreamRng::new(50 + i as u64).stream("gen/grid");
            let pairs = gen_grid_with_patterns(*task, 500, &mut vocab, &mut stream).unwrap();
            assert!(!pairs.is_empty());
            for (ex, pattern) in &pairs {
                let flat = ex.context.grid_flat().unwrap();
                let mut grid = [[0u8; 3]; 3];
                for r in 0..3 {
                    for c in 0..3 {
                        grid[r][c] = vocab.token(flat[r * 3 + c]).unwrap().parse().unwrap();
                    }
                }
                let want = check_grid(&grid, pattern).unwrap();
                assert_eq!(ex.answer, vocab.id(&want.to_string()).unwrap());
                // Distractors never overlap pattern cells: pattern cells
                // already verified; additionally every non-pattern non-zero
                // cell must not be a pattern cell.
                let pattern_cells: Vec<(usize, usize)> =
                    pattern.cells.iter().map(|&(r, c, _)| (r, c)).collect();
                for r in 0..3 {
                    for c in 0..3 {
                        if grid[r][c] != 0 && !pattern_cells.contains(&(r, c)) {
                            // distractor: symbol must differ from pattern syms
                            assert!(pattern.cells.iter().all(|&(_, _, s)| s != grid[r][c]));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn gen_is_deterministic() {
        let run = || {
            let mut vocab = Vocabulary::new();
            let mut stream = StreamRng::new(4).stream("gen/grid/corner");
            gen_grid(GridTask::Corner, 300, &mut vocab, &mut stream).unwrap()
        };
        assert_eq!(run(), run());
    }
}
