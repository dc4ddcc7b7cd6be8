// Temporary profiling probe; deleted before release.

use dcroute::baselines::{build_multipath_model, Demand, RouteSet};
use dcroute::lp::{solve_with, LpBackend, SolveOptions};
use dcroute::topology::{gscale, k_shortest_paths, path_channels};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

// steady-state-shaped demand set: ~60 actives, exponential windows over ~80
// slots, exponential residuals
fn steady_demands(paths_per: usize, seed: u64) -> (dcroute::topology::Topology<f64>, Vec<Demand<f64>>) {
    let topo = gscale::<f64>();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut demands = Vec::new();
    for i in 0..60 {
        let src = rng.gen_range(0..12);
        let mut dst = rng.gen_range(0..11);
        if dst >= src {
            dst += 1;
        }
        let window = (-10.0 * (1.0f64 - rng.gen::<f64>()).ln()).ceil().max(1.0) as u64;
        let dl = window.min(80);
        let vol = (-(dl as f64) / 8.0 * (1.0f64 - rng.gen::<f64>()).ln()).min(dl as f64 * 0.9).max(0.01);
        let routes = if paths_per == 0 {
            RouteSet::AllEdges
        } else {
            let paths = k_shortest_paths(&topo, src, dst, paths_per);
            RouteSet::Paths(paths.iter().map(|p| path_channels(&topo, p)).collect())
        };
        demands.push(Demand { id: i, src, dst, vol, dl, routes });
    }
    (topo, demands)
}

#[test]
#[ignore]
fn profile_steady_state_shapes() {
    for (name, paths) in [("pip", 1), ("ksp3", 3), ("ksp7", 7), ("global", 0)] {
        let (topo, demands) = steady_demands(paths, 9);
        let model = build_multipath_model(&topo, 0, &demands);
        println!(
            "{name}: {} vars x {} rows",
            model.lp.num_vars(),
            model.lp.num_constraints()
        );
        let reps = if paths == 0 { 5 } else { 20 };
        let t = Instant::now();
        let mut st = None;
        for _ in 0..reps {
            let sol = solve_with(&model.lp, SolveOptions { backend: LpBackend::Highs, ..Default::default() }).unwrap();
            st = Some(sol.status);
        }
        println!("  {name}: {:.2} ms ({st:?})", t.elapsed().as_secs_f64() / reps as f64 * 1e3);
    }
}
