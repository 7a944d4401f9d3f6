use serde::Serialize;

use crate::error::{Error, Result};
use crate::mdp::{exact_optimal_values, rollout_markov_episode, MarkovPolicy, MdpSpec, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MazeMove {
    Up,
    Down,
    Left,
    Right,
    Stay,
}

impl MazeMove {
    pub const ALL: [MazeMove; 5] =
        [MazeMove::Up, MazeMove::Down, MazeMove::Left, MazeMove::Right, MazeMove::Stay];

    pub fn index(self) -> usize {
        self as usize
    }

    fn delta(self) -> (i64, i64) {
        match self {
            MazeMove::Up => (0, 1),
            MazeMove::Down => (0, -1),
            MazeMove::Left => (-1, 0),
            MazeMove::Right => (1, 0),
            MazeMove::Stay => (0, 0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Cell {
    pub name: &'static str,
    pub x: i64,
    pub y: i64,
}

/// Discrete stitching maze.
///
/// ```text
///   y=1   A  S
///   y=0   B  M  C  G
///        x=0 1  2  3
/// ```
///
/// The detour `S -> A -> B -> M -> C -> G` takes five moves; the shortest
/// route `S -> M -> C -> G` takes three. Entering (or staying in) the
/// absorbing goal pays 1; every other transition pays 0.
#[derive(Debug, Clone)]
pub struct GridMaze {
    pub cells: Vec<Cell>,
    /// Pairs of cell indices separated by a wall.
    pub walls: Vec<(usize, usize)>,
    pub start: usize,
    pub a: usize,
    pub b: usize,
    pub m: usize,
    pub goal: usize,
    pub mdp: MdpSpec,
}

const DETOUR: [MazeMove; 5] =
    [MazeMove::Left, MazeMove::Down, MazeMove::Right, MazeMove::Right, MazeMove::Right];
const TO_MIDDLE: [MazeMove; 1] = [MazeMove::Down];

impl GridMaze {
    pub fn horizon(&self) -> usize {
        self.mdp.horizon()
    }

    pub fn cell_index(&self, name: &str) -> Option<usize> {
        self.cells.iter().position(|c| c.name == name)
    }

    /// Actions of the scripted detour trajectory, padded with `Stay`.
    pub fn detour_script(&self) -> Vec<MazeMove> {
        pad(&DETOUR, self.horizon())
    }

    /// Actions of the scripted `S -> M` trajectory, padded with `Stay`.
    pub fn stitch_script(&self) -> Vec<MazeMove> {
        pad(&TO_MIDDLE, self.horizon())
    }

    fn script_policy(&self, script: &[MazeMove]) -> MarkovPolicy {
        let n = self.mdp.n_states();
        let dist = script
            .iter()
            .map(|mv| (0..n).map(|_| crate::mdp::one_hot(mv.index(), MazeMove::ALL.len())).collect())
            .collect();
        MarkovPolicy::new(dist).expect("one-hot rows are distributions")
    }
}

fn pad(moves: &[MazeMove], horizon: usize) -> Vec<MazeMove> {
    let mut out = moves.to_vec();
    out.resize(horizon, MazeMove::Stay);
    out
}

pub fn build_grid_maze(horizon: usize) -> Result<GridMaze> {
    if horizon < DETOUR.len() + 1 {
        return Err(Error::InvalidParameter(format!(
            "maze horizon {horizon} is shorter than the detour ({} moves) plus one",
            DETOUR.len()
        )));
    }
    let cells = vec![
        Cell { name: "S", x: 1, y: 1 },
        Cell { name: "A", x: 0, y: 1 },
        Cell { name: "B", x: 0, y: 0 },
        Cell { name: "M", x: 1, y: 0 },
        Cell { name: "C", x: 2, y: 0 },
        Cell { name: "G", x: 3, y: 0 },
    ];
    let walls: Vec<(usize, usize)> = Vec::new();
    let goal = 5;
    let lookup = |x: i64, y: i64| cells.iter().position(|c| c.x == x && c.y == y);
    let blocked = |i: usize, j: usize| walls.iter().any(|&(p, q)| (p, q) == (i, j) || (q, p) == (i, j));

    let next: Vec<Vec<usize>> = (0..cells.len())
        .map(|i| {
            MazeMove::ALL
                .iter()
                .map(|mv| {
                    if i == goal {
                        return goal;
                    }
                    let (dx, dy) = mv.delta();
                    match lookup(cells[i].x + dx, cells[i].y + dy) {
                        Some(j) if !blocked(i, j) => j,
                        _ => i,
                    }
                })
                .collect()
        })
        .collect();
    let reward =
        next.iter().map(|row| row.iter().map(|&j| if j == goal { 1.0 } else { 0.0 }).collect()).collect();
    let mdp = MdpSpec::deterministic(horizon, 0, next, reward)?;
    let maze = GridMaze { cells, walls, start: 0, a: 1, b: 2, m: 3, goal, mdp };

    let detour = scripted_return(&maze, &maze.detour_script());
    let optimal = exact_optimal_values(&maze.mdp).optimal_return(&maze.mdp);
    if !(optimal > detour) {
        return Err(Error::InvalidParameter(format!(
            "maze optimum {optimal} does not beat the detour return {detour}"
        )));
    }
    Ok(maze)
}

fn scripted_return(maze: &GridMaze, script: &[MazeMove]) -> f64 {
    rollout_markov_episode(&maze.mdp, &maze.script_policy(script), 0, 0)
        .expect("script matches the maze")
        .total_return()
}

/// `n_detour` detour trajectories followed by `n_stitch` `S -> M`
/// trajectories. Scripts are noiseless, so the seed only selects streams.
pub fn generate_maze_dataset(
    maze: &GridMaze,
    n_detour: usize,
    n_stitch: usize,
    rng_seed: u64,
) -> Result<Vec<Trajectory>> {
    let detour = maze.script_policy(&maze.detour_script());
    let stitch = maze.script_policy(&maze.stitch_script());
    let mut out = Vec::with_capacity(n_detour + n_stitch);
    for (i, policy) in
        std::iter::repeat_n(&detour, n_detour).chain(std::iter::repeat_n(&stitch, n_stitch)).enumerate()
    {
        out.push(rollout_markov_episode(&maze.mdp, policy, rng_seed, i as u64)?);
    }
    let best = out.iter().map(Trajectory::total_return).fold(f64::NEG_INFINITY, f64::max);
    let optimal = exact_optimal_values(&maze.mdp).optimal_return(&maze.mdp);
    if !out.is_empty() && !(optimal > best) {
        return Err(Error::InvalidParameter(format!("dataset already attains the optimum {optimal}")));
    }
    Ok(out)
}
