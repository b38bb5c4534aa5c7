//! Goal-only-rewards gridworlds: random map generation, slip dynamics,
//! shortest paths and the plain-text map format.
//!
//! A map holds one start cell, three goals (one per reward value) and a set
//! of obstacles. Moving into an obstacle or off the grid leaves the agent in
//! place. With probability `slip_probability` the chosen direction is
//! replaced by one of the other three, uniformly.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GenerationError, MapParseError};

/// Rewards carried by the three goals, in map-file digit order `1`, `2`, `3`.
pub const GOAL_REWARDS: [f64; 3] = [0.25, 0.5, 1.0];

/// Index of a cell in row-major order (`y * width + x`).
pub type StateId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pos {
    pub x: usize,
    pub y: usize,
}

impl Pos {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// The four moves. The discriminant is the action's column in the Q-table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Up = 0,
    Down = 1,
    Left = 2,
    Right = 3,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::Up, Direction::Down, Direction::Left, Direction::Right];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    #[inline]
    pub fn from_index(i: usize) -> Direction {
        Self::ALL[i]
    }

    /// `(dx, dy)` with `y` growing downwards, matching the row order of map files.
    #[inline]
    pub fn delta(self) -> (isize, isize) {
        match self {
            Direction::Up => (0, -1),
            Direction::Down => (0, 1),
            Direction::Left => (-1, 0),
            Direction::Right => (1, 0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Tile {
    Free,
    Obstacle,
    Start,
    Goal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Goal {
    pub pos: Pos,
    pub reward: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub next_state: StateId,
    pub reward: f64,
    pub terminal: bool,
}

/// Parameters for [`generate_map`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapSpec {
    pub width: usize,
    pub height: usize,
    /// Fraction of the non-start, non-goal cells that become obstacles.
    pub obstacle_density: f64,
    pub goal_distance_min: usize,
    pub goal_distance_max: usize,
    pub slip_probability: f64,
    pub max_attempts: usize,
}

impl Default for MapSpec {
    fn default() -> Self {
        Self {
            width: 20,
            height: 20,
            obstacle_density: 0.2,
            goal_distance_min: 20,
            goal_distance_max: 25,
            slip_probability: 0.1,
            max_attempts: 1000,
        }
    }
}

/// An immutable gridworld.
#[derive(Clone, Debug, PartialEq)]
pub struct GridWorld {
    width: usize,
    height: usize,
    tiles: Vec<Tile>,
    start: Pos,
    goals: Vec<Goal>,
    slip_probability: f64,
    // Reward per state, zero everywhere except goals.
    rewards: Vec<f64>,
}

impl GridWorld {
    /// Builds a world from its parts, checking the structural invariants
    /// (one start, distinct goals off obstacles, slip in `[0, 1]`).
    /// Goal distances are not checked here; see [`GridWorld::goal_distances`].
    pub fn new(
        width: usize,
        height: usize,
        obstacles: &[Pos],
        start: Pos,
        goals: Vec<Goal>,
        slip_probability: f64,
    ) -> Result<Self, MapParseError> {
        if width == 0 || height == 0 {
            return Err(MapParseError::Invalid("empty grid".into()));
        }
        if !(0.0..=1.0).contains(&slip_probability) {
            return Err(MapParseError::Invalid(format!(
                "slip probability {slip_probability} outside [0, 1]"
            )));
        }
        let in_bounds = |p: Pos| p.x < width && p.y < height;
        let mut tiles = vec![Tile::Free; width * height];
        let mut rewards = vec![0.0; width * height];
        for &o in obstacles {
            if !in_bounds(o) {
                return Err(MapParseError::Invalid(format!("obstacle {o} off grid")));
            }
            tiles[o.y * width + o.x] = Tile::Obstacle;
        }
        if !in_bounds(start) {
            return Err(MapParseError::Invalid(format!("start {start} off grid")));
        }
        if tiles[start.y * width + start.x] != Tile::Free {
            return Err(MapParseError::Invalid(format!("start {start} on an obstacle")));
        }
        tiles[start.y * width + start.x] = Tile::Start;
        for g in &goals {
            if !in_bounds(g.pos) {
                return Err(MapParseError::Invalid(format!("goal {} off grid", g.pos)));
            }
            if !(g.reward.is_finite() && g.reward != 0.0) {
                return Err(MapParseError::Invalid(format!(
                    "goal {} has reward {}",
                    g.pos, g.reward
                )));
            }
            let i = g.pos.y * width + g.pos.x;
            if tiles[i] != Tile::Free {
                return Err(MapParseError::Invalid(format!(
                    "goal {} overlaps the start, an obstacle or another goal",
                    g.pos
                )));
            }
            tiles[i] = Tile::Goal;
            rewards[i] = g.reward;
        }
        Ok(Self {
            width,
            height,
            tiles,
            start,
            goals,
            slip_probability,
            rewards,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_states(&self) -> usize {
        self.width * self.height
    }

    pub fn start(&self) -> Pos {
        self.start
    }

    pub fn start_state(&self) -> StateId {
        self.state_of(self.start)
    }

    pub fn goals(&self) -> &[Goal] {
        &self.goals
    }

    pub fn slip_probability(&self) -> f64 {
        self.slip_probability
    }

    /// Same map with a different slip probability.
    pub fn with_slip(mut self, slip_probability: f64) -> Self {
        assert!((0.0..=1.0).contains(&slip_probability));
        self.slip_probability = slip_probability;
        self
    }

    #[inline]
    pub fn state_of(&self, p: Pos) -> StateId {
        p.y * self.width + p.x
    }

    #[inline]
    pub fn pos_of(&self, s: StateId) -> Pos {
        Pos::new(s % self.width, s / self.width)
    }

    pub fn tile(&self, p: Pos) -> Tile {
        self.tiles[self.state_of(p)]
    }

    #[inline]
    pub fn is_blocked(&self, s: StateId) -> bool {
        self.tiles[s] == Tile::Obstacle
    }

    #[inline]
    pub fn is_goal(&self, s: StateId) -> bool {
        self.tiles[s] == Tile::Goal
    }

    #[inline]
    pub fn reward_at(&self, s: StateId) -> f64 {
        self.rewards[s]
    }

    pub fn obstacles(&self) -> Vec<Pos> {
        (0..self.num_states())
            .filter(|&s| self.is_blocked(s))
            .map(|s| self.pos_of(s))
            .collect()
    }

    /// The cell reached by moving from `s` in direction `d`, or `None` when
    /// the move leaves the grid.
    #[inline]
    pub fn neighbor(&self, s: StateId, d: Direction) -> Option<StateId> {
        let (x, y) = (s % self.width, s / self.width);
        let (dx, dy) = d.delta();
        let nx = x.checked_add_signed(dx)?;
        let ny = y.checked_add_signed(dy)?;
        (nx < self.width && ny < self.height).then(|| ny * self.width + nx)
    }

    /// Where a move from `s` in direction `d` ends up, after blocking.
    #[inline]
    pub fn resolve_move(&self, s: StateId, d: Direction) -> StateId {
        match self.neighbor(s, d) {
            Some(n) if !self.is_blocked(n) => n,
            _ => s,
        }
    }

    /// Samples the effective direction: the intended one with probability
    /// `1 - slip`, otherwise one of the remaining three uniformly.
    #[inline]
    pub fn sample_direction<R: Rng + ?Sized>(&self, intended: Direction, rng: &mut R) -> Direction {
        if self.slip_probability > 0.0 && rng.gen_bool(self.slip_probability) {
            let k = rng.gen_range(0..3);
            let skip = intended.index();
            Direction::from_index(if k >= skip { k + 1 } else { k })
        } else {
            intended
        }
    }

    /// One environment transition from the non-terminal state `state`.
    #[inline]
    pub fn step<R: Rng + ?Sized>(&self, state: StateId, action: Direction, rng: &mut R) -> StepOutcome {
        debug_assert!(!self.is_blocked(state) && !self.is_goal(state));
        let effective = self.sample_direction(action, rng);
        let next_state = self.resolve_move(state, effective);
        let reward = self.rewards[next_state];
        StepOutcome {
            next_state,
            reward,
            terminal: self.is_goal(next_state),
        }
    }

    /// BFS distances from `from` over non-obstacle cells. Cells in `blocked`
    /// are treated as obstacles too. `None` marks unreachable cells.
    pub fn distances_from(&self, from: Pos, blocked: &[Pos]) -> Vec<Option<usize>> {
        let n = self.num_states();
        let mut dist = vec![None; n];
        let mut wall = vec![false; n];
        for &b in blocked {
            wall[self.state_of(b)] = true;
        }
        let src = self.state_of(from);
        if self.is_blocked(src) {
            return dist;
        }
        dist[src] = Some(0);
        let mut queue = VecDeque::from([src]);
        while let Some(s) = queue.pop_front() {
            let d = dist[s].unwrap();
            for dir in Direction::ALL {
                if let Some(n) = self.neighbor(s, dir) {
                    if dist[n].is_none() && !self.is_blocked(n) && !wall[n] {
                        dist[n] = Some(d + 1);
                        queue.push_back(n);
                    }
                }
            }
        }
        dist
    }

    /// Obstacle-respecting 4-neighbour shortest path length, `None` when
    /// `to` cannot be reached.
    pub fn shortest_path_length(&self, from: Pos, to: Pos) -> Option<usize> {
        self.distances_from(from, &[])[self.state_of(to)]
    }

    /// One shortest path from `from` to `to` as a list of moves.
    pub fn shortest_path(&self, from: Pos, to: Pos) -> Option<Vec<Direction>> {
        // Walk back from `to` along strictly decreasing distances.
        let dist = self.distances_from(from, &[]);
        let mut s = self.state_of(to);
        let mut d = dist[s]?;
        let mut moves = Vec::with_capacity(d);
        while d > 0 {
            let (prev, dir) = Direction::ALL
                .iter()
                .filter_map(|&dir| {
                    // Cell `p` such that moving `dir` from `p` lands on `s`.
                    let back = match dir {
                        Direction::Up => Direction::Down,
                        Direction::Down => Direction::Up,
                        Direction::Left => Direction::Right,
                        Direction::Right => Direction::Left,
                    };
                    let p = self.neighbor(s, back)?;
                    (dist[p] == Some(d - 1)).then_some((p, dir))
                })
                .next()?;
            moves.push(dir);
            s = prev;
            d -= 1;
        }
        moves.reverse();
        Some(moves)
    }

    /// Shortest path length from the start to each goal, in goal order.
    pub fn goal_distances(&self) -> Vec<Option<usize>> {
        let dist = self.distances_from(self.start, &[]);
        self.goals.iter().map(|g| dist[self.state_of(g.pos)]).collect()
    }

    /// Renders the map in the text format: a `width height` header line and
    /// one row per line (`.` free, `#` obstacle, `S` start, `1`/`2`/`3` goals).
    pub fn to_map_string(&self) -> String {
        let mut out = format!("{} {}\n", self.width, self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                let s = y * self.width + x;
                let c = match self.tiles[s] {
                    Tile::Free => '.',
                    Tile::Obstacle => '#',
                    Tile::Start => 'S',
                    Tile::Goal => goal_char(self.rewards[s]),
                };
                out.push(c);
            }
            out.push('\n');
        }
        out
    }
}

fn goal_char(reward: f64) -> char {
    match GOAL_REWARDS.iter().position(|&r| r == reward) {
        Some(i) => char::from(b'1' + i as u8),
        None => '?',
    }
}

impl fmt::Display for GridWorld {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_map_string())
    }
}

impl FromStr for GridWorld {
    type Err = MapParseError;

    /// Parses the text format. Slip probability is not part of the file and
    /// takes the default of 0.1.
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut lines = text.lines();
        let header = lines.next().ok_or(MapParseError::MissingHeader)?;
        let mut dims = header.split_whitespace().map(str::parse::<usize>);
        let (width, height) = match (dims.next(), dims.next(), dims.next()) {
            (Some(Ok(w)), Some(Ok(h)), None) if w > 0 && h > 0 => (w, h),
            _ => return Err(MapParseError::BadHeader(header.to_string())),
        };
        let mut obstacles = Vec::new();
        let mut start = None;
        let mut goals: Vec<Goal> = Vec::new();
        let mut seen_digits = [false; 3];
        let mut rows = 0;
        for (y, line) in lines.enumerate() {
            if y >= height {
                if line.is_empty() {
                    continue;
                }
                return Err(MapParseError::RowCount {
                    expected: height,
                    found: y + 1,
                });
            }
            rows += 1;
            if line.chars().count() != width {
                return Err(MapParseError::RowWidth {
                    row: y,
                    expected: width,
                    found: line.chars().count(),
                });
            }
            for (x, c) in line.chars().enumerate() {
                let p = Pos::new(x, y);
                match c {
                    '.' => {}
                    '#' => obstacles.push(p),
                    'S' => {
                        if start.replace(p).is_some() {
                            return Err(MapParseError::Invalid("more than one start cell".into()));
                        }
                    }
                    '1'..='3' => {
                        let i = (c as u8 - b'1') as usize;
                        if std::mem::replace(&mut seen_digits[i], true) {
                            return Err(MapParseError::Invalid(format!("goal '{c}' appears twice")));
                        }
                        goals.push(Goal {
                            pos: p,
                            reward: GOAL_REWARDS[i],
                        });
                    }
                    other => {
                        return Err(MapParseError::BadChar {
                            row: y,
                            col: x,
                            found: other,
                        })
                    }
                }
            }
        }
        if rows != height {
            return Err(MapParseError::RowCount {
                expected: height,
                found: rows,
            });
        }
        let start = start.ok_or_else(|| MapParseError::Invalid("no start cell".into()))?;
        if goals.len() != GOAL_REWARDS.len() {
            return Err(MapParseError::Invalid(format!(
                "expected 3 goals, found {}",
                goals.len()
            )));
        }
        goals.sort_by(|a, b| a.reward.total_cmp(&b.reward));
        GridWorld::new(
            width,
            height,
            &obstacles,
            start,
            goals,
            MapSpec::default().slip_probability,
        )
    }
}

/// Generates a random map satisfying `spec`, deterministically from `seed`.
///
/// Each attempt places the start uniformly, turns an exact share of the
/// remaining cells into obstacles, and draws the three goals among free
/// cells whose shortest-path distance from the start lies in the requested
/// range. A goal triple is only kept when no goal's shortest path has to
/// cross another goal.
pub fn generate_map(seed: u64, spec: &MapSpec) -> Result<GridWorld, GenerationError> {
    let fail = |reason: String| GenerationError {
        seed,
        spec: spec.clone(),
        reason,
    };
    if spec.width == 0 || spec.height == 0 {
        return Err(fail("empty grid".into()));
    }
    if !(0.0..1.0).contains(&spec.obstacle_density) {
        return Err(fail(format!(
            "obstacle density {} outside [0, 1)",
            spec.obstacle_density
        )));
    }
    if !(0.0..=1.0).contains(&spec.slip_probability) {
        return Err(fail(format!(
            "slip probability {} outside [0, 1]",
            spec.slip_probability
        )));
    }
    if spec.goal_distance_min > spec.goal_distance_max {
        return Err(fail("goal distance min exceeds max".into()));
    }
    let n = spec.width * spec.height;
    if n < 1 + GOAL_REWARDS.len() {
        return Err(fail("grid too small for a start and three goals".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_obstacles = (spec.obstacle_density * (n - 1 - GOAL_REWARDS.len()) as f64).round() as usize;
    let pos = |s: usize| Pos::new(s % spec.width, s / spec.width);

    for _ in 0..spec.max_attempts {
        let start = rng.gen_range(0..n);
        let mut others: Vec<usize> = (0..n).filter(|&s| s != start).collect();
        others.shuffle(&mut rng);
        let obstacles: Vec<Pos> = others[..n_obstacles].iter().map(|&s| pos(s)).collect();

        let open = GridWorld::new(
            spec.width,
            spec.height,
            &obstacles,
            pos(start),
            Vec::new(),
            spec.slip_probability,
        )
        .expect("generated parts are in bounds");
        let dist = open.distances_from(pos(start), &[]);
        let mut candidates: Vec<usize> = (0..n)
            .filter(|&s| matches!(dist[s], Some(d) if d >= spec.goal_distance_min && d <= spec.goal_distance_max))
            .collect();
        if candidates.len() < GOAL_REWARDS.len() {
            continue;
        }
        candidates.shuffle(&mut rng);
        let picked: Vec<Pos> = candidates[..GOAL_REWARDS.len()].iter().map(|&s| pos(s)).collect();

        // Every goal must keep its distance when the other goals are walls,
        // otherwise following its shortest path would end the episode early.
        let clear = picked.iter().enumerate().all(|(i, &g)| {
            let others: Vec<Pos> = picked
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &p)| p)
                .collect();
            open.distances_from(pos(start), &others)[open.state_of(g)] == dist[open.state_of(g)]
        });
        if !clear {
            continue;
        }

        let mut rewards = GOAL_REWARDS;
        rewards.shuffle(&mut rng);
        let mut goals: Vec<Goal> = picked
            .into_iter()
            .zip(rewards)
            .map(|(pos, reward)| Goal { pos, reward })
            .collect();
        goals.sort_by(|a, b| a.reward.total_cmp(&b.reward));
        return Ok(GridWorld::new(
            spec.width,
            spec.height,
            &obstacles,
            pos(start),
            goals,
            spec.slip_probability,
        )
        .expect("generated parts are consistent"));
    }
    Err(fail(format!("no valid map after {} attempts", spec.max_attempts)))
}
