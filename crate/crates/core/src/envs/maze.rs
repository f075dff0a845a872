//! Deterministic wall mazes on an integer grid.

use std::fmt;

use rand::Rng;

use super::EnvError;
use crate::goal::Goal;

/// A grid cell; states and goals of the maze are both cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

impl Goal for Cell {
    fn coords(&self) -> Vec<f64> {
        vec![self.x as f64, self.y as f64]
    }

    fn distance(&self, other: &Self) -> f64 {
        let dx = (self.x - other.x) as f64;
        let dy = (self.y - other.y) as f64;
        (dx * dx + dy * dy).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
    Stay,
}

impl Action {
    pub const ALL: [Action; 5] = [Action::Up, Action::Down, Action::Left, Action::Right, Action::Stay];
    pub const COUNT: usize = 5;

    pub fn from_index(i: usize) -> Option<Action> {
        Self::ALL.get(i).copied()
    }

    pub fn index(self) -> usize {
        self as usize
    }

    fn delta(self) -> (i32, i32) {
        match self {
            Action::Up => (0, 1),
            Action::Down => (0, -1),
            Action::Left => (-1, 0),
            Action::Right => (1, 0),
            Action::Stay => (0, 0),
        }
    }
}

/// Stock layout: a 10×10 spiral with dead ends.
pub const SPIRAL10: &str = include_str!("../../layouts/spiral10.txt");
/// Stock layout: a 20×20, three-cell-wide U corridor.
pub const UCORRIDOR: &str = include_str!("../../layouts/ucorridor.txt");

#[derive(Debug, Clone)]
pub struct GridMaze {
    width: i32,
    height: i32,
    /// Per cell, per movement direction (up, down, left, right): edge blocked.
    blocked: Vec<[bool; 4]>,
    wall: Vec<bool>,
    start: Cell,
    desired_region: Vec<Cell>,
    horizon: usize,
}

impl GridMaze {
    /// Parses the text layout format: one row per line, top row first;
    /// `.` open, `#` wall cell, `S` start, `G` desired-region cell.
    pub fn parse(text: &str, horizon: usize) -> Result<Self, EnvError> {
        let rows: Vec<&str> = text
            .lines()
            .map(str::trim_end)
            .filter(|l| !l.is_empty())
            .collect();
        if rows.is_empty() {
            return Err(EnvError::Layout("empty layout".into()));
        }
        if horizon == 0 {
            return Err(EnvError::Layout("horizon must be positive".into()));
        }
        let width = rows[0].chars().count();
        let height = rows.len();
        let mut wall = vec![false; width * height];
        let mut start = None;
        let mut desired_region = Vec::new();
        for (r, row) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return Err(EnvError::Layout(format!(
                    "row {r} has {} cells, expected {width}",
                    row.chars().count()
                )));
            }
            let y = (height - 1 - r) as i32;
            for (x, ch) in row.chars().enumerate() {
                let cell = Cell::new(x as i32, y);
                match ch {
                    '.' => {}
                    '#' => wall[y as usize * width + x] = true,
                    'S' => {
                        if start.replace(cell).is_some() {
                            return Err(EnvError::Layout("more than one start cell".into()));
                        }
                    }
                    'G' => desired_region.push(cell),
                    other => {
                        return Err(EnvError::Layout(format!(
                            "unknown layout character '{other}'"
                        )))
                    }
                }
            }
        }
        let start = start.ok_or_else(|| EnvError::Layout("no start cell".into()))?;
        if desired_region.is_empty() {
            return Err(EnvError::Layout("no desired-region cell".into()));
        }
        desired_region.sort_by_key(|c| (c.y, c.x));

        let mut maze = Self {
            width: width as i32,
            height: height as i32,
            blocked: vec![[false; 4]; width * height],
            wall,
            start,
            desired_region,
            horizon,
        };
        for id in 0..maze.num_cells() {
            let cell = maze.cell_of(id);
            for action in &Action::ALL[..4] {
                let (dx, dy) = action.delta();
                let next = Cell::new(cell.x + dx, cell.y + dy);
                if !maze.in_bounds(next) || maze.is_wall(next) || maze.is_wall(cell) {
                    maze.blocked[id][action.index()] = true;
                }
            }
        }
        Ok(maze)
    }

    pub fn spiral10() -> Self {
        Self::parse(SPIRAL10, 50).expect("stock layout parses")
    }

    pub fn ucorridor() -> Self {
        Self::parse(UCORRIDOR, 150).expect("stock layout parses")
    }

    pub fn with_horizon(mut self, horizon: usize) -> Result<Self, EnvError> {
        if horizon == 0 {
            return Err(EnvError::Layout("horizon must be positive".into()));
        }
        self.horizon = horizon;
        Ok(self)
    }

    /// Blocks the edge between `cell` and its neighbour in direction `action`,
    /// in both directions.
    pub fn block_edge(&mut self, cell: Cell, action: Action) {
        if action == Action::Stay || !self.in_bounds(cell) {
            return;
        }
        let id = self.cell_id(cell);
        self.blocked[id][action.index()] = true;
        let (dx, dy) = action.delta();
        let other = Cell::new(cell.x + dx, cell.y + dy);
        if self.in_bounds(other) {
            let back = match action {
                Action::Up => Action::Down,
                Action::Down => Action::Up,
                Action::Left => Action::Right,
                Action::Right => Action::Left,
                Action::Stay => unreachable!(),
            };
            let oid = self.cell_id(other);
            self.blocked[oid][back.index()] = true;
        }
    }

    pub fn width(&self) -> i32 {
        self.width
    }

    pub fn height(&self) -> i32 {
        self.height
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn start(&self) -> Cell {
        self.start
    }

    pub fn desired_region(&self) -> &[Cell] {
        &self.desired_region
    }

    pub fn num_cells(&self) -> usize {
        (self.width * self.height) as usize
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && c.x < self.width && c.y < self.height
    }

    pub fn is_wall(&self, c: Cell) -> bool {
        self.in_bounds(c) && self.wall[self.cell_id(c)]
    }

    pub fn cell_id(&self, c: Cell) -> usize {
        (c.y * self.width + c.x) as usize
    }

    pub fn cell_of(&self, id: usize) -> Cell {
        let id = id as i32;
        Cell::new(id % self.width, id / self.width)
    }

    /// Open (non-wall) cells.
    pub fn open_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.num_cells())
            .map(|id| self.cell_of(id))
            .filter(|&c| !self.is_wall(c))
    }

    /// The achieved goal of a state: its cell.
    pub fn achieved_goal(&self, state: Cell) -> Cell {
        state
    }

    /// Start state and a desired goal drawn uniformly from the desired region.
    pub fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> (Cell, Cell) {
        let g = self.desired_region[rng.random_range(0..self.desired_region.len())];
        (self.start, g)
    }

    /// One deterministic move; blocked edges and the boundary leave the state unchanged.
    pub fn step(&self, state: Cell, action: Action) -> Cell {
        if action == Action::Stay || !self.in_bounds(state) {
            return state;
        }
        if self.blocked[self.cell_id(state)][action.index()] {
            return state;
        }
        let (dx, dy) = action.delta();
        Cell::new(state.x + dx, state.y + dy)
    }

    /// Breadth-first shortest path lengths from `from` (`None` = unreachable).
    pub fn distances_from(&self, from: Cell) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.num_cells()];
        let mut queue = std::collections::VecDeque::new();
        dist[self.cell_id(from)] = Some(0);
        queue.push_back(from);
        while let Some(c) = queue.pop_front() {
            let d = dist[self.cell_id(c)].unwrap();
            for a in &Action::ALL[..4] {
                let n = self.step(c, *a);
                let nid = self.cell_id(n);
                if dist[nid].is_none() {
                    dist[nid] = Some(d + 1);
                    queue.push_back(n);
                }
            }
        }
        dist
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn spiral_reset_is_corner_to_corner() {
        let maze = GridMaze::spiral10();
        assert_eq!((maze.width(), maze.height(), maze.horizon()), (10, 10, 50));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let (s, g) = maze.reset(&mut rng);
            assert_eq!(s, Cell::new(0, 0));
            assert!(g.x >= 8 && g.y >= 8);
        }
        assert_eq!(maze.desired_region().len(), 4);
    }

    #[test]
    fn reset_is_seed_deterministic() {
        let maze = GridMaze::spiral10();
        let a = maze.reset(&mut ChaCha8Rng::seed_from_u64(9));
        let b = maze.reset(&mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn single_cell_region() {
        let maze = GridMaze::parse("S.G", 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..10 {
            assert_eq!(maze.reset(&mut rng).1, Cell::new(2, 0));
        }
    }

    #[test]
    fn walls_block_moves() {
        let maze = GridMaze::parse("..G\n.#.\nS..", 10).unwrap();
        // (0,1) → right is the wall at (1,1)
        assert_eq!(maze.step(Cell::new(0, 1), Action::Right), Cell::new(0, 1));
        assert_eq!(maze.step(Cell::new(0, 0), Action::Up), Cell::new(0, 1));
        assert_eq!(maze.step(Cell::new(0, 0), Action::Left), Cell::new(0, 0));
        assert_eq!(maze.step(Cell::new(2, 2), Action::Up), Cell::new(2, 2));
        assert_eq!(maze.step(Cell::new(1, 0), Action::Stay), Cell::new(1, 0));
    }

    #[test]
    fn edge_walls_block_both_ways() {
        let mut maze = GridMaze::parse("S..G", 10).unwrap();
        maze.block_edge(Cell::new(1, 0), Action::Right);
        assert_eq!(maze.step(Cell::new(1, 0), Action::Right), Cell::new(1, 0));
        assert_eq!(maze.step(Cell::new(2, 0), Action::Left), Cell::new(2, 0));
        assert_eq!(maze.step(Cell::new(0, 0), Action::Right), Cell::new(1, 0));
    }

    #[test]
    fn layout_errors() {
        assert!(GridMaze::parse("", 5).is_err());
        assert!(GridMaze::parse("..G", 5).is_err());
        assert!(GridMaze::parse("S..", 5).is_err());
        assert!(GridMaze::parse("S.G\n..", 5).is_err());
        assert!(GridMaze::parse("S?G", 5).is_err());
        assert!(GridMaze::parse("SSG", 5).is_err());
        assert!(GridMaze::parse("S.G", 0).is_err());
    }

    #[test]
    fn stock_layouts_are_solvable_within_horizon() {
        for maze in [GridMaze::spiral10(), GridMaze::ucorridor()] {
            let dist = maze.distances_from(maze.start());
            for g in maze.desired_region() {
                let d = dist[maze.cell_id(*g)].expect("desired cell reachable");
                assert!(d < maze.horizon());
            }
        }
        let spiral = GridMaze::spiral10();
        let dist = spiral.distances_from(spiral.start());
        let nearest = spiral
            .desired_region()
            .iter()
            .map(|g| dist[spiral.cell_id(*g)].unwrap())
            .min()
            .unwrap();
        assert!(nearest >= 25, "spiral should be long-horizon, got {nearest}");
    }
}
