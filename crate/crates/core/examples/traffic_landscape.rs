//! Prints the operator's plan landscape for a network fixture: per-plan
//! mean reward and congestion under sampled demands, the operator's three
//! routes, and the most loaded edges. Handy when picking fixture
//! parameters.

use stackelucb::games::{AdversaryView, GameEnv};
use stackelucb::traffic::{RoadNetwork, TrafficEnv, TrafficParams};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let path = args.get(1).expect("usage: traffic_landscape <net> [origin] [dest]");
    let origin: usize = args.get(2).map_or(1, |s| s.parse().unwrap());
    let dest: usize = args.get(3).map_or(20, |s| s.parse().unwrap());
    let net = RoadNetwork::from_file(std::path::Path::new(path), 0.01).unwrap();
    let params = TrafficParams {
        origin,
        dest,
        total_units: 300.0,
        kappa: 10.0,
        noise_sigma: 5.0,
    };
    let env = TrafficEnv::new(net, &params, 0).unwrap();

    println!("operator routes {origin} -> {dest}:");
    for (i, r) in env.operator_routes().iter().enumerate() {
        let nodes: Vec<String> = r.nodes.iter().map(|n| (n + 1).to_string()).collect();
        println!("  route {i}: len {:.1}  {}", r.length, nodes.join("-"));
    }
    println!("declared reward range: {:?}", env.reward_range());

    let view = AdversaryView {
        strategies: &[],
        realized_actions: &[],
    };
    let thetas: Vec<Vec<f64>> = (0..20).map(|t| env.type_at(t, &view)).collect();

    let mut rows: Vec<(usize, f64, f64)> = Vec::new();
    for (i, plan) in env.actions().iter().enumerate() {
        let mut reward = 0.0;
        let mut cong = 0.0;
        for th in &thetas {
            let y = env.respond(plan, th)[0];
            cong += y;
            reward += env.oracle().eval(plan, &[y]);
        }
        rows.push((i, reward / 20.0, cong / 20.0));
    }
    let mut by_reward = rows.clone();
    by_reward.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    println!("\ntop plans by mean reward (idx, frac, groups, reward, y):");
    for (i, r, y) in by_reward.iter().take(8) {
        let p = &env.plans()[*i];
        println!(
            "  {:2}  {:4.2}  {:?}  {:8.2}  {:6.2}",
            i, p.routed_fraction, p.group_routes, r, y
        );
    }
    println!("notable plans:");
    for idx in [0, env.all_shortest_plan_index()] {
        let (_, r, y) = rows[idx];
        println!(
            "  {:2}  {:4.2}  {:?}  {:8.2}  {:6.2}",
            idx,
            env.plans()[idx].routed_fraction,
            env.plans()[idx].group_routes,
            r,
            y
        );
    }

    // busiest edges at the zero plan under mean demand
    let z = env.occupancy(&env.actions()[0], &thetas[0]).unwrap();
    let mut loads: Vec<(usize, f64)> = z
        .iter()
        .enumerate()
        .map(|(e, &l)| (e, l / env.network().edges[e].capacity))
        .collect();
    loads.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    println!("\nbusiest edges (z/C) with no operator traffic:");
    for (e, ratio) in loads.iter().take(10) {
        let edge = &env.network().edges[*e];
        println!(
            "  {}->{}  z/C {:<6.2} C {:.0}",
            edge.from + 1,
            edge.to + 1,
            ratio,
            edge.capacity
        );
    }
}
