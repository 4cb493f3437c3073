//! Node placement, clustering and routing.
//!
//! Node indices are laid out as: gateway, server, cloud store, access
//! points, sensors, attackers.

use std::collections::{BTreeSet, VecDeque};
use std::f64::consts::TAU;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ScenarioConfig, SimError};

pub const MAX_PLACEMENT_ATTEMPTS: u32 = 10_000;
const KMEANS_ITERATIONS: usize = 50;

pub const GATEWAY: usize = 0;
pub const SERVER: usize = 1;
pub const CLOUD_STORE: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    Sensor,
    AccessPoint,
    Gateway,
    Server,
    CloudStore,
    Attacker,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn dist(self, o: Point) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Topology {
    pub positions: Vec<Point>,
    pub roles: Vec<Role>,
    /// Undirected links, each stored once as (low, high), sorted.
    pub adjacency: Vec<(usize, usize)>,
    /// Serving access point of each sensor or attacker.
    pub cluster_ap: Vec<Option<usize>>,
    /// Hop-by-hop route to the gateway for each sensor or attacker; empty
    /// for infrastructure nodes.
    pub routes: Vec<Vec<usize>>,
}

impl Topology {
    pub fn len(&self) -> usize {
        self.roles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roles.is_empty()
    }

    pub fn nodes_with(&self, role: Role) -> impl Iterator<Item = usize> + '_ {
        self.roles.iter().enumerate().filter(move |(_, r)| **r == role).map(|(i, _)| i)
    }

    pub fn neighbors(&self, node: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .adjacency
            .iter()
            .filter_map(|&(a, b)| {
                if a == node {
                    Some(b)
                } else if b == node {
                    Some(a)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// Hop count from `node` to the gateway.
    pub fn hops(&self, node: usize) -> usize {
        self.routes[node].len().saturating_sub(1)
    }

    /// Stable byte encoding, for comparing topologies exactly.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for (p, r) in self.positions.iter().zip(&self.roles) {
            out.push(*r as u8);
            out.extend_from_slice(&p.x.to_bits().to_be_bytes());
            out.extend_from_slice(&p.y.to_bits().to_be_bytes());
        }
        for &(a, b) in &self.adjacency {
            out.extend_from_slice(&(a as u32).to_be_bytes());
            out.extend_from_slice(&(b as u32).to_be_bytes());
        }
        for route in &self.routes {
            out.extend_from_slice(&(route.len() as u32).to_be_bytes());
            route.iter().for_each(|n| out.extend_from_slice(&(*n as u32).to_be_bytes()));
        }
        out
    }
}

fn sample_in_disc(rng: &mut ChaCha8Rng, radius: f64) -> Point {
    let r = radius * rng.gen::<f64>().sqrt();
    let theta = TAU * rng.gen::<f64>();
    Point { x: r * theta.cos(), y: r * theta.sin() }
}

/// Places `count` more points, each at least `spacing` from every point
/// already in `placed`.
fn place(
    rng: &mut ChaCha8Rng,
    placed: &mut Vec<Point>,
    count: usize,
    radius: f64,
    spacing: f64,
    first_node: usize,
) -> Result<(), SimError> {
    for k in 0..count {
        let mut attempts = 0;
        loop {
            if attempts == MAX_PLACEMENT_ATTEMPTS {
                return Err(SimError::PlacementFailure { node: first_node + k, attempts });
            }
            attempts += 1;
            let p = sample_in_disc(rng, radius);
            if placed.iter().all(|q| q.dist(p) >= spacing) {
                placed.push(p);
                break;
            }
        }
    }
    Ok(())
}

fn nearest(p: Point, centers: &[Point]) -> usize {
    let mut best = 0;
    for (i, c) in centers.iter().enumerate().skip(1) {
        if p.dist(*c) < p.dist(centers[best]) {
            best = i;
        }
    }
    best
}

/// Lloyd's algorithm with k-means++ seeding.
fn kmeans(rng: &mut ChaCha8Rng, points: &[Point], k: usize) -> Vec<Point> {
    let mut centers = vec![points[rng.gen_range(0..points.len())]];
    while centers.len() < k {
        let d2: Vec<f64> = points.iter().map(|p| p.dist(centers[nearest(*p, &centers)]).powi(2)).collect();
        let total: f64 = d2.iter().sum();
        if total == 0.0 {
            centers.push(points[rng.gen_range(0..points.len())]);
            continue;
        }
        let mut target = rng.gen::<f64>() * total;
        let mut pick = points.len() - 1;
        for (i, w) in d2.iter().enumerate() {
            if target < *w {
                pick = i;
                break;
            }
            target -= w;
        }
        centers.push(points[pick]);
    }
    let mut assign = vec![usize::MAX; points.len()];
    for _ in 0..KMEANS_ITERATIONS {
        let next: Vec<usize> = points.iter().map(|p| nearest(*p, &centers)).collect();
        if next == assign {
            break;
        }
        assign = next;
        for (c, center) in centers.iter_mut().enumerate() {
            let members: Vec<&Point> = points.iter().zip(&assign).filter(|(_, a)| **a == c).map(|(p, _)| p).collect();
            if !members.is_empty() {
                let n = members.len() as f64;
                *center = Point {
                    x: members.iter().map(|p| p.x).sum::<f64>() / n,
                    y: members.iter().map(|p| p.y).sum::<f64>() / n,
                };
            }
        }
    }
    centers
}

pub fn generate_topology(config: &ScenarioConfig, seed: u64) -> Result<Topology, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_s = config.n_sensors;
    let n_ap = config.n_access_points.min(n_s).max(1);
    let n_att = config.attacker_count;
    let first_sensor = 3 + n_ap;
    let first_attacker = first_sensor + n_s;

    let mut field = Vec::with_capacity(n_s + n_att);
    if n_s + n_att >= 2 && config.min_spacing > 2.0 * config.area_radius {
        return Err(SimError::PlacementFailure { node: first_sensor + 1, attempts: 0 });
    }
    place(&mut rng, &mut field, n_s, config.area_radius, config.min_spacing, first_sensor)?;
    let centers = kmeans(&mut rng, &field[..n_s], n_ap);
    place(&mut rng, &mut field, n_att, config.area_radius, config.min_spacing, first_attacker)?;

    let origin = Point { x: 0.0, y: 0.0 };
    let mut positions = vec![origin; 3];
    positions.extend_from_slice(&centers);
    positions.extend_from_slice(&field);
    let mut roles = vec![Role::Gateway, Role::Server, Role::CloudStore];
    roles.extend(std::iter::repeat_n(Role::AccessPoint, n_ap));
    roles.extend(std::iter::repeat_n(Role::Sensor, n_s));
    roles.extend(std::iter::repeat_n(Role::Attacker, n_att));
    let total = roles.len();

    let mut cluster_ap = vec![None; total];
    for (i, p) in field.iter().enumerate() {
        cluster_ap[first_sensor + i] = Some(3 + nearest(*p, &centers));
    }

    // Radio links among field nodes and access points.
    let mut edges = BTreeSet::new();
    for a in 3..total {
        for b in a + 1..total {
            if positions[a].dist(positions[b]) <= config.connection_radius {
                edges.insert((a, b));
            }
        }
    }
    edges.insert((GATEWAY, SERVER));
    edges.insert((GATEWAY, CLOUD_STORE));
    for ap in 3..first_sensor {
        edges.insert((GATEWAY, ap));
    }
    // Greedy descent toward the serving AP through sensors; where it stalls,
    // the stalled node gets a direct uplink. Attackers always uplink directly
    // so they never change a sensor's route.
    let is_sensor = |n: usize| (first_sensor..first_attacker).contains(&n);
    for u in first_attacker..total {
        let ap = cluster_ap[u].unwrap();
        edges.insert((ap, u));
    }
    for u in first_sensor..first_attacker {
        let ap = cluster_ap[u].unwrap();
        let mut cur = u;
        loop {
            let d = positions[cur].dist(positions[ap]);
            if d <= config.connection_radius {
                break;
            }
            let next = (first_sensor..first_attacker)
                .filter(|&v| v != cur && positions[v].dist(positions[cur]) <= config.connection_radius)
                .filter(|&v| positions[v].dist(positions[ap]) < d)
                .min_by(|&a, &b| positions[a].dist(positions[ap]).total_cmp(&positions[b].dist(positions[ap])));
            match next {
                Some(v) => cur = v,
                None => {
                    edges.insert((cur.min(ap), cur.max(ap)));
                    break;
                }
            }
        }
    }
    let adjacency: Vec<(usize, usize)> = edges.into_iter().collect();
    let mut neighbors = vec![Vec::new(); total];
    for &(a, b) in &adjacency {
        neighbors[a].push(b);
        neighbors[b].push(a);
    }
    neighbors.iter_mut().for_each(|n| n.sort_unstable());

    // Shortest path to the serving AP, relaying only through sensors.
    let mut routes = vec![Vec::new(); total];
    for u in first_sensor..total {
        let ap = cluster_ap[u].unwrap();
        let mut prev = vec![usize::MAX; total];
        prev[u] = u;
        let mut queue = VecDeque::from([u]);
        while let Some(cur) = queue.pop_front() {
            if cur == ap {
                break;
            }
            for &v in &neighbors[cur] {
                if prev[v] == usize::MAX && (v == ap || is_sensor(v)) {
                    prev[v] = cur;
                    queue.push_back(v);
                }
            }
        }
        if prev[ap] == usize::MAX {
            return Err(SimError::Internal(format!("node {u} has no route to its access point")));
        }
        let mut path = vec![GATEWAY, ap];
        let mut cur = ap;
        while cur != u {
            cur = prev[cur];
            path.push(cur);
        }
        path.reverse();
        routes[u] = path;
    }

    Ok(Topology { positions, roles, adjacency, cluster_ap, routes })
}
