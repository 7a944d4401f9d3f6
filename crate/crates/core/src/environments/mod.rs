//! Constructors for the benchmark MDPs and their offline datasets.

mod ambiguity;
mod linearq;
mod maze;
mod stitch;

pub use ambiguity::{build_reward_ambiguity_pair, RewardAmbiguityPair, ACTION_LEFT, ACTION_RIGHT};
pub use linearq::{build_linearq, build_linearq_dataset, linearq_reference, LinearQEnv, LinearQReference};
pub use maze::{build_grid_maze, generate_maze_dataset, Cell, GridMaze, MazeMove};
pub use stitch::{build_stitch_counterexample, StitchCounterexample};
