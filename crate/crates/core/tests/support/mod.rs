//! Reference implementations used as oracles by the integration tests.
//! They only touch the public tile accessors of `GridWorld`.

#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use rewardflip::gridworld::{GridWorld, Pos, Tile};

fn open(world: &GridWorld, x: i64, y: i64) -> bool {
    x >= 0
        && y >= 0
        && (x as usize) < world.width()
        && (y as usize) < world.height()
        && world.tile(Pos::new(x as usize, y as usize)) != Tile::Obstacle
}

/// Plain breadth-first search over open cells.
pub fn bfs_distance(world: &GridWorld, from: Pos, to: Pos) -> Option<usize> {
    let mut seen = vec![vec![false; world.width()]; world.height()];
    let mut queue = VecDeque::new();
    seen[from.y][from.x] = true;
    queue.push_back((from.x as i64, from.y as i64, 0));
    while let Some((x, y, d)) = queue.pop_front() {
        if x as usize == to.x && y as usize == to.y {
            return Some(d);
        }
        for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            let (nx, ny) = (x + dx, y + dy);
            if open(world, nx, ny) && !seen[ny as usize][nx as usize] {
                seen[ny as usize][nx as usize] = true;
                queue.push_back((nx, ny, d + 1));
            }
        }
    }
    None
}

/// Dijkstra with unit edge weights, settling nodes from a priority queue.
pub fn dijkstra_distance(world: &GridWorld, from: Pos, to: Pos) -> Option<usize> {
    let (w, h) = (world.width(), world.height());
    let mut dist = vec![usize::MAX; w * h];
    let mut heap = BinaryHeap::new();
    dist[from.y * w + from.x] = 0;
    heap.push(Reverse((0usize, from.x, from.y)));
    while let Some(Reverse((d, x, y))) = heap.pop() {
        if d > dist[y * w + x] {
            continue;
        }
        if (x, y) == (to.x, to.y) {
            return Some(d);
        }
        for (dx, dy) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)] {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            if !open(world, nx, ny) {
                continue;
            }
            let k = ny as usize * w + nx as usize;
            if d + 1 < dist[k] {
                dist[k] = d + 1;
                heap.push(Reverse((d + 1, nx as usize, ny as usize)));
            }
        }
    }
    None
}

/// The SARSA backup in temporal-difference form, `q + alpha * delta`.
pub fn sarsa_backup(q: f64, r: f64, q_next: f64, alpha: f64, gamma: f64) -> f64 {
    let delta = r + gamma * q_next - q;
    q + alpha * delta
}

/// `|x - n p| <= 4 sqrt(n p (1 - p))`.
pub fn within_binomial_band(count: u64, n: u64, p: f64) -> bool {
    let n = n as f64;
    (count as f64 - n * p).abs() <= 4.0 * (n * p * (1.0 - p)).sqrt()
}
