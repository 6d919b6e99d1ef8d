//! Congestion-routing environment: a directed road network where an operator
//! commits a routing plan for its own fleet, remaining users pick the faster
//! of their two preferred routes in response, and the operator's reward
//! trades routed units against the network's average congestion.
//!
//! Travel times follow the Bureau of Public Roads curve
//! `t_e(z) = c_e (1 + 0.15 (z/C_e)⁴)`; the congestion of an edge is the
//! normalized excess `0.15 (z/C_e)⁴`.

use crate::games::{AdversaryView, GameEnv};
use crate::policies::{BoxMax, RewardOracle};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrafficError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("negative edge load {0}")]
    NegativeLoad(f64),
    #[error("node {0} out of range")]
    BadNode(usize),
    #[error("no route between nodes {origin} and {dest}")]
    Disconnected { origin: usize, dest: usize },
    #[error("need {needed} distinct routes between operator nodes, found {found}")]
    TooFewRoutes { needed: usize, found: usize },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub capacity: f64,
    pub free_flow_time: f64,
}

/// Directed road network with node positions and an ordered list of
/// origin-destination pairs carrying base demand.
#[derive(Debug, Clone)]
pub struct RoadNetwork {
    pub nodes: Vec<(f64, f64)>,
    pub edges: Vec<Edge>,
    pub od_pairs: Vec<(usize, usize)>,
    pub base_demand: Vec<f64>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl RoadNetwork {
    pub fn new(
        nodes: Vec<(f64, f64)>,
        edges: Vec<Edge>,
        od_pairs: Vec<(usize, usize)>,
        base_demand: Vec<f64>,
    ) -> Result<Self, TrafficError> {
        for e in &edges {
            if e.from >= nodes.len() || e.to >= nodes.len() {
                return Err(TrafficError::BadNode(e.from.max(e.to)));
            }
            if e.capacity <= 0.0 || e.free_flow_time <= 0.0 {
                return Err(TrafficError::InvalidParam(
                    "capacities and free-flow times must be positive".into(),
                ));
            }
        }
        if od_pairs.len() != base_demand.len() {
            return Err(TrafficError::InvalidParam(
                "demand table length must match OD pair count".into(),
            ));
        }
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for (i, e) in edges.iter().enumerate() {
            adjacency[e.from].push((e.to, i));
        }
        Ok(Self {
            nodes,
            edges,
            od_pairs,
            base_demand,
            adjacency,
        })
    }

    /// Euclidean length of an edge from node positions; route enumeration
    /// ranks by this distance, free-flow time is only used inside the BPR
    /// curve.
    pub fn edge_length(&self, edge: usize) -> f64 {
        let e = &self.edges[edge];
        let (x1, y1) = self.nodes[e.from];
        let (x2, y2) = self.nodes[e.to];
        ((x1 - x2).powi(2) + (y1 - y2).powi(2)).sqrt()
    }

    /// Parses the plain-text tabular format:
    ///
    /// ```text
    /// [nodes]
    /// <id> <x> <y>
    /// [edges]
    /// <from> <to> <capacity> <free_flow_time>
    /// [od_demand]
    /// <origin> <dest> <demand>
    /// ```
    ///
    /// Node ids are 1-based in the file. `scale` multiplies capacities and
    /// demands (0.01 for the bundled fixture's source units).
    pub fn parse(text: &str, scale: f64) -> Result<Self, TrafficError> {
        #[derive(PartialEq)]
        enum Section {
            None,
            Nodes,
            Edges,
            Demand,
        }
        let mut section = Section::None;
        let mut nodes: Vec<(f64, f64)> = Vec::new();
        let mut edges = Vec::new();
        let mut od_pairs = Vec::new();
        let mut base_demand = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| TrafficError::Parse {
                line: lineno + 1,
                msg: msg.to_string(),
            };
            match line {
                "[nodes]" => {
                    section = Section::Nodes;
                    continue;
                }
                "[edges]" => {
                    section = Section::Edges;
                    continue;
                }
                "[od_demand]" => {
                    section = Section::Demand;
                    continue;
                }
                _ => {}
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let num = |s: &str| -> Result<f64, TrafficError> {
                s.parse::<f64>().map_err(|_| err("expected a number"))
            };
            let node_id = |s: &str| -> Result<usize, TrafficError> {
                let id = s.parse::<usize>().map_err(|_| err("expected a node id"))?;
                if id == 0 {
                    return Err(err("node ids are 1-based"));
                }
                Ok(id - 1)
            };
            match section {
                Section::Nodes => {
                    if fields.len() != 3 {
                        return Err(err("expected: id x y"));
                    }
                    let id = node_id(fields[0])?;
                    if id != nodes.len() {
                        return Err(err("node ids must be consecutive from 1"));
                    }
                    nodes.push((num(fields[1])?, num(fields[2])?));
                }
                Section::Edges => {
                    if fields.len() != 4 {
                        return Err(err("expected: from to capacity free_flow_time"));
                    }
                    edges.push(Edge {
                        from: node_id(fields[0])?,
                        to: node_id(fields[1])?,
                        capacity: num(fields[2])? * scale,
                        free_flow_time: num(fields[3])?,
                    });
                }
                Section::Demand => {
                    if fields.len() != 3 {
                        return Err(err("expected: origin dest demand"));
                    }
                    od_pairs.push((node_id(fields[0])?, node_id(fields[1])?));
                    base_demand.push(num(fields[2])? * scale);
                }
                Section::None => return Err(err("data before any [section] header")),
            }
        }
        Self::new(nodes, edges, od_pairs, base_demand)
    }

    pub fn from_file(path: &Path, scale: f64) -> Result<Self, TrafficError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, scale)
    }
}

/// BPR travel time `c_e (1 + 0.15 (z/C_e)⁴)`.
pub fn bpr_travel_time(free_flow_time: f64, capacity: f64, load: f64) -> Result<f64, TrafficError> {
    if load < 0.0 {
        return Err(TrafficError::NegativeLoad(load));
    }
    Ok(free_flow_time * (1.0 + 0.15 * (load / capacity).powi(4)))
}

/// Normalized excess travel time `0.15 (z/C_e)⁴` of one edge.
pub fn edge_congestion(capacity: f64, load: f64) -> Result<f64, TrafficError> {
    if load < 0.0 {
        return Err(TrafficError::NegativeLoad(load));
    }
    Ok(0.15 * (load / capacity).powi(4))
}

/// A simple route: node sequence with the matching edge indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub nodes: Vec<usize>,
    pub edges: Vec<usize>,
    pub length: f64,
}

/// Result of loopless k-shortest-route enumeration.
#[derive(Debug, Clone)]
pub struct KRoutes {
    pub routes: Vec<Route>,
    /// False when fewer than the requested number of routes exist.
    pub complete: bool,
}

const LEN_EPS: f64 = 1e-9;

/// Shortest path by geometric distance with bans, returning the
/// lexicographically smallest node sequence among equal-length optima.
fn shortest_path(
    network: &RoadNetwork,
    origin: usize,
    dest: usize,
    banned_nodes: &[bool],
    banned_edges: &[bool],
) -> Option<Route> {
    let n = network.nodes.len();
    let mut dist = vec![f64::INFINITY; n];

    #[derive(PartialEq)]
    struct Item(f64, usize);
    impl Eq for Item {}
    impl Ord for Item {
        fn cmp(&self, other: &Self) -> Ordering {
            // reversed for a min-heap; distances are never NaN
            other
                .0
                .partial_cmp(&self.0)
                .unwrap()
                .then(other.1.cmp(&self.1))
        }
    }
    impl PartialOrd for Item {
        fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
            Some(self.cmp(other))
        }
    }

    if banned_nodes[origin] || banned_nodes[dest] {
        return None;
    }
    dist[origin] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(Item(0.0, origin));
    while let Some(Item(d, u)) = heap.pop() {
        if d > dist[u] + LEN_EPS {
            continue;
        }
        for &(v, e) in &network.adjacency[u] {
            if banned_nodes[v] || banned_edges[e] {
                continue;
            }
            let nd = d + network.edge_length(e);
            if nd < dist[v] - LEN_EPS {
                dist[v] = nd;
                heap.push(Item(nd, v));
            }
        }
    }
    if !dist[dest].is_finite() {
        return None;
    }

    // shortest-path DAG restricted to nodes that still reach dest within it
    let mut reaches = vec![false; n];
    reaches[dest] = true;
    // relax in order of decreasing distance-to-go: repeated sweeps suffice at
    // this scale
    let mut changed = true;
    while changed {
        changed = false;
        for u in 0..n {
            if reaches[u] || !dist[u].is_finite() || banned_nodes[u] {
                continue;
            }
            for &(v, e) in &network.adjacency[u] {
                if banned_nodes[v] || banned_edges[e] {
                    continue;
                }
                let on_dag = (dist[u] + network.edge_length(e) - dist[v]).abs() <= LEN_EPS;
                if on_dag && reaches[v] {
                    reaches[u] = true;
                    changed = true;
                    break;
                }
            }
        }
    }

    // greedy lexicographic walk through the DAG
    let mut nodes = vec![origin];
    let mut edges = Vec::new();
    let mut u = origin;
    while u != dest {
        let mut next: Option<(usize, usize)> = None;
        for &(v, e) in &network.adjacency[u] {
            if banned_nodes[v] || banned_edges[e] || !reaches[v] {
                continue;
            }
            let on_dag = (dist[u] + network.edge_length(e) - dist[v]).abs() <= LEN_EPS;
            if on_dag && next.is_none_or(|(best, _)| v < best) {
                next = Some((v, e));
            }
        }
        let (v, e) = next?;
        nodes.push(v);
        edges.push(e);
        u = v;
    }
    Some(Route {
        nodes,
        edges,
        length: dist[dest],
    })
}

/// Loopless k-shortest routes by deviation (spur paths off each prefix of
/// the previously accepted routes), in nondecreasing length with
/// lexicographic node-sequence tie-breaks.
pub fn k_shortest_routes(
    network: &RoadNetwork,
    origin: usize,
    dest: usize,
    k: usize,
) -> Result<KRoutes, TrafficError> {
    if origin >= network.nodes.len() || dest >= network.nodes.len() {
        return Err(TrafficError::BadNode(origin.max(dest)));
    }
    let no_nodes = vec![false; network.nodes.len()];
    let no_edges = vec![false; network.edges.len()];
    let first = shortest_path(network, origin, dest, &no_nodes, &no_edges)
        .ok_or(TrafficError::Disconnected { origin, dest })?;

    let mut accepted = vec![first];
    let mut candidates: Vec<Route> = Vec::new();
    while accepted.len() < k {
        let prev = accepted.last().unwrap().clone();
        for i in 0..prev.nodes.len() - 1 {
            let spur_node = prev.nodes[i];
            let root_nodes = &prev.nodes[..=i];
            let root_edges = &prev.edges[..i];

            let mut banned_edges = no_edges.clone();
            for r in &accepted {
                if r.nodes.len() > i && r.nodes[..=i] == *root_nodes {
                    if let Some(&e) = r.edges.get(i) {
                        banned_edges[e] = true;
                    }
                }
            }
            let mut banned_nodes = no_nodes.clone();
            for &v in &root_nodes[..i] {
                banned_nodes[v] = true;
            }

            if let Some(spur) = shortest_path(network, spur_node, dest, &banned_nodes, &banned_edges)
            {
                let mut nodes = root_nodes.to_vec();
                nodes.extend_from_slice(&spur.nodes[1..]);
                let mut edges = root_edges.to_vec();
                edges.extend_from_slice(&spur.edges);
                let length = edges.iter().map(|&e| network.edge_length(e)).sum();
                let cand = Route {
                    nodes,
                    edges,
                    length,
                };
                let seen = accepted.iter().chain(&candidates).any(|r| r.nodes == cand.nodes);
                if !seen {
                    candidates.push(cand);
                }
            }
        }
        if candidates.is_empty() {
            return Ok(KRoutes {
                routes: accepted,
                complete: false,
            });
        }
        let best = candidates
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                a.length
                    .partial_cmp(&b.length)
                    .unwrap()
                    .then_with(|| a.nodes.cmp(&b.nodes))
            })
            .map(|(i, _)| i)
            .unwrap();
        accepted.push(candidates.swap_remove(best));
    }
    Ok(KRoutes {
        routes: accepted,
        complete: true,
    })
}

/// One operator routing plan: a fraction of the fleet split into three
/// equal groups over the three shortest origin-destination routes.
#[derive(Debug, Clone)]
pub struct RoutingPlan {
    pub routed_fraction: f64,
    /// Route index (into the 3 shortest) of each of the three groups;
    /// `None` for the 0% plan.
    pub group_routes: Option<[usize; 3]>,
    pub edge_loads: Vec<f64>,
    pub routed_units: f64,
}

/// Enumerates the operator's plan set: the 0% plan plus, for each fraction
/// in {25%, 50%, 75%, 100%}, one plan per multiset of three routes chosen
/// from the three shortest (10 multisets), for 41 plans total.
pub fn generate_plan_set(
    network: &RoadNetwork,
    origin: usize,
    dest: usize,
    total_units: f64,
) -> Result<(Vec<RoutingPlan>, Vec<Route>), TrafficError> {
    let kr = k_shortest_routes(network, origin, dest, 3)?;
    if kr.routes.len() < 3 {
        return Err(TrafficError::TooFewRoutes {
            needed: 3,
            found: kr.routes.len(),
        });
    }
    let routes = kr.routes;
    let n_edges = network.edges.len();
    let mut plans = vec![RoutingPlan {
        routed_fraction: 0.0,
        group_routes: None,
        edge_loads: vec![0.0; n_edges],
        routed_units: 0.0,
    }];
    for (fi, fraction) in [0.25, 0.5, 0.75, 1.0].iter().enumerate() {
        let _ = fi;
        let group_units = fraction * total_units / 3.0;
        for a in 0..3 {
            for b in a..3 {
                for c in b..3 {
                    let mut edge_loads = vec![0.0; n_edges];
                    for g in [a, b, c] {
                        for &e in &routes[g].edges {
                            edge_loads[e] += group_units;
                        }
                    }
                    plans.push(RoutingPlan {
                        routed_fraction: *fraction,
                        group_routes: Some([a, b, c]),
                        edge_loads,
                        routed_units: fraction * total_units,
                    });
                }
            }
        }
    }
    Ok((plans, routes))
}

/// Each user population's demand goes onto whichever of its two pre-computed
/// shortest routes has the smaller travel time under the operator's own
/// loads (ties take the first, shorter-distance route); returns the users'
/// edge occupancy.
pub fn users_route_choice(
    network: &RoadNetwork,
    user_routes: &[KRoutes],
    plan_loads: &[f64],
    demands: &[f64],
) -> Result<Vec<f64>, TrafficError> {
    let mut occupancy = vec![0.0; network.edges.len()];
    for (pair, kr) in user_routes.iter().enumerate() {
        let demand = demands[pair];
        if demand <= 0.0 {
            continue;
        }
        let time = |r: &Route| -> Result<f64, TrafficError> {
            let mut t = 0.0;
            for &e in &r.edges {
                let edge = &network.edges[e];
                t += bpr_travel_time(edge.free_flow_time, edge.capacity, plan_loads[e])?;
            }
            Ok(t)
        };
        let chosen = if kr.routes.len() >= 2 && time(&kr.routes[1])? < time(&kr.routes[0])? {
            &kr.routes[1]
        } else {
            &kr.routes[0]
        };
        for &e in &chosen.edges {
            occupancy[e] += demand;
        }
    }
    Ok(occupancy)
}

/// Average congestion over the edges given the total occupancy `z`.
pub fn network_response(network: &RoadNetwork, occupancy: &[f64]) -> Result<f64, TrafficError> {
    let mut total = 0.0;
    for (e, &z) in occupancy.iter().enumerate() {
        total += edge_congestion(network.edges[e].capacity, z)?;
    }
    Ok(total / network.edges.len() as f64)
}

/// Operator reward: routed units minus `κ` times the average congestion.
pub fn operator_reward(routed_units: f64, kappa: f64, congestion: f64) -> f64 {
    routed_units - kappa * congestion
}

/// Environment parameters beyond the network file itself. Node ids are
/// 1-based to match the file format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrafficParams {
    pub origin: usize,
    pub dest: usize,
    #[serde(default = "default_total_units")]
    pub total_units: f64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_traffic_noise")]
    pub noise_sigma: f64,
}

fn default_total_units() -> f64 {
    300.0
}
fn default_kappa() -> f64 {
    10.0
}
fn default_traffic_noise() -> f64 {
    5.0
}

pub struct TrafficOracle {
    kappa: f64,
    out_of_origin: Vec<usize>,
    into_origin: Vec<usize>,
    lipschitz: f64,
}

impl TrafficOracle {
    /// Units delivered by a plan, read off the edge loads as the net outflow
    /// of the origin node.
    pub fn routed_units(&self, edge_loads: &[f64]) -> f64 {
        let out: f64 = self.out_of_origin.iter().map(|&e| edge_loads[e]).sum();
        let into: f64 = self.into_origin.iter().map(|&e| edge_loads[e]).sum();
        out - into
    }
}

impl RewardOracle for TrafficOracle {
    fn eval(&self, action: &[f64], response: &[f64]) -> f64 {
        operator_reward(self.routed_units(action), self.kappa, response[0])
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn maximize_over_box(&self, action: &[f64], lcb: &[f64], ucb: &[f64]) -> BoxMax {
        // reward is strictly decreasing in the congestion, so the optimum
        // sits at the lower bound
        let y = lcb[0].min(ucb[0]);
        BoxMax {
            argmax: vec![y],
            value: self.eval(action, &[y]),
            fallback: false,
        }
    }
}

/// The finite repeated game between the operator and the network users.
pub struct TrafficEnv {
    network: RoadNetwork,
    plans: Vec<RoutingPlan>,
    operator_routes: Vec<Route>,
    action_vectors: Vec<Vec<f64>>,
    user_routes: Vec<KRoutes>,
    oracle: TrafficOracle,
    noise_sigma: f64,
    demand_seed: u64,
    reward_range: (f64, f64),
}

impl TrafficEnv {
    /// Builds plans, pre-computes every OD pair's two shortest routes, and
    /// derives the declared reward range from the plan sweep under full base
    /// demand. `demand_seed` drives the per-round demand randomization.
    pub fn new(
        network: RoadNetwork,
        params: &TrafficParams,
        demand_seed: u64,
    ) -> Result<Self, TrafficError> {
        if params.origin == 0 || params.dest == 0 {
            return Err(TrafficError::InvalidParam("node ids are 1-based".into()));
        }
        let origin = params.origin - 1;
        let dest = params.dest - 1;
        let (plans, operator_routes) =
            generate_plan_set(&network, origin, dest, params.total_units)?;
        let action_vectors: Vec<Vec<f64>> = plans.iter().map(|p| p.edge_loads.clone()).collect();

        let mut user_routes = Vec::with_capacity(network.od_pairs.len());
        for &(o, d) in &network.od_pairs {
            user_routes.push(k_shortest_routes(&network, o, d, 2)?);
        }

        let oracle = TrafficOracle {
            kappa: params.kappa,
            out_of_origin: network
                .edges
                .iter()
                .enumerate()
                .filter(|(_, e)| e.from == origin)
                .map(|(i, _)| i)
                .collect(),
            into_origin: network
                .edges
                .iter()
                .enumerate()
                .filter(|(_, e)| e.to == origin)
                .map(|(i, _)| i)
                .collect(),
            lipschitz: params.kappa.max(1.0),
        };

        // reward spread over plans at the demand extremes, with noise headroom
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for plan in &plans {
            let u = users_route_choice(
                &network,
                &user_routes,
                &plan.edge_loads,
                &network.base_demand,
            )?;
            let z: Vec<f64> = plan.edge_loads.iter().zip(&u).map(|(a, b)| a + b).collect();
            let y_full = network_response(&network, &z)?;
            let u0 = users_route_choice(
                &network,
                &user_routes,
                &plan.edge_loads,
                &vec![0.0; network.od_pairs.len()],
            )?;
            let z0: Vec<f64> = plan
                .edge_loads
                .iter()
                .zip(&u0)
                .map(|(a, b)| a + b)
                .collect();
            let y_min = network_response(&network, &z0)?;
            lo = lo.min(operator_reward(plan.routed_units, params.kappa, y_full));
            hi = hi.max(operator_reward(plan.routed_units, params.kappa, y_min));
        }
        let headroom = params.kappa * params.noise_sigma;
        let reward_range = (lo - headroom, hi + headroom);

        Ok(Self {
            network,
            plans,
            operator_routes,
            action_vectors,
            user_routes,
            oracle,
            noise_sigma: params.noise_sigma,
            demand_seed,
            reward_range,
        })
    }

    pub fn network(&self) -> &RoadNetwork {
        &self.network
    }

    pub fn plans(&self) -> &[RoutingPlan] {
        &self.plans
    }

    pub fn operator_routes(&self) -> &[Route] {
        &self.operator_routes
    }

    pub fn user_routes(&self) -> &[KRoutes] {
        &self.user_routes
    }

    /// Index of the plan routing everything over the single shortest route.
    pub fn all_shortest_plan_index(&self) -> usize {
        self.plans
            .iter()
            .position(|p| p.routed_fraction == 1.0 && p.group_routes == Some([0, 0, 0]))
            .expect("plan set contains the 100% shortest-route plan")
    }

    /// Index of the 0% plan.
    pub fn zero_plan_index(&self) -> usize {
        0
    }

    /// Per-edge occupancy for a plan under given demands.
    pub fn occupancy(&self, plan_loads: &[f64], demands: &[f64]) -> Result<Vec<f64>, TrafficError> {
        let u = users_route_choice(&self.network, &self.user_routes, plan_loads, demands)?;
        Ok(plan_loads.iter().zip(&u).map(|(a, b)| a + b).collect())
    }
}

impl GameEnv for TrafficEnv {
    fn actions(&self) -> &[Vec<f64>] {
        &self.action_vectors
    }

    fn response_dim(&self) -> usize {
        1
    }

    fn type_at(&self, t: usize, _view: &AdversaryView) -> Vec<f64> {
        // per-round demand stream: independent of call order and history;
        // the offset keeps these streams clear of the harness's labels
        let mut rng = ChaCha8Rng::seed_from_u64(self.demand_seed);
        rng.set_stream((1u64 << 32) + t as u64);
        self.network
            .base_demand
            .iter()
            .map(|d| d * rng.random::<f64>())
            .collect()
    }

    fn respond(&self, action: &[f64], theta: &[f64]) -> Vec<f64> {
        let z = self.occupancy(action, theta).expect("nonnegative loads");
        vec![network_response(&self.network, &z).expect("nonnegative loads")]
    }

    fn oracle(&self) -> &dyn RewardOracle {
        &self.oracle
    }

    fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    fn reward_range(&self) -> (f64, f64) {
        self.reward_range
    }
}
