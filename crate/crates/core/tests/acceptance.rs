//! Acceptance suite. Each test prints one PASS/FAIL line straight to stdout so
//! the verdicts survive output capture, then asserts.
//!
//! Tests share a lock: the allocation counter and the wall-clock bounds are only
//! meaningful when nothing else runs alongside.

mod common;

use std::alloc::{GlobalAlloc, Layout, System};
use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Mutex, MutexGuard};
use std::time::{Duration, Instant};

use common::{dense_goal, free_cells, max_abs_diff, random_map, rng};
use probflow::flow::{min_time, run_flows, FlowSet};
use probflow::grid::{action_matrix, build_kernel, default_masks, Action, ActionMatrix, Cell, GridMap, TransitionKernel};
use probflow::multi::{simulate, SimStatus, WorldState};
use probflow::oracle::{bfs_distance, dense_messages, enumerate_paths, enumerated_posteriors, DenseChain};
use probflow::planner::{goal_marginal, greedy_plan, path_likelihood, sample_path, Horizon, Scenario};
use probflow::scenario::{parse_scenario, Parsed, WorldSpec};
use rand::Rng;

struct Counting;

static CURRENT: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);

unsafe impl GlobalAlloc for Counting {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let p = System.alloc(layout);
        if !p.is_null() {
            let now = CURRENT.fetch_add(layout.size(), Ordering::Relaxed) + layout.size();
            PEAK.fetch_max(now, Ordering::Relaxed);
        }
        p
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        System.dealloc(ptr, layout);
        CURRENT.fetch_sub(layout.size(), Ordering::Relaxed);
    }
}

#[global_allocator]
static ALLOC: Counting = Counting;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(n: usize, title: &str, ok: bool, detail: &str) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "criterion {n} [{title}]: {verdict} ({detail})");
    let _ = out.flush();
    assert!(ok, "criterion {n} failed: {detail}");
}

fn secs(d: Duration) -> String {
    format!("{:.2} s", d.as_secs_f64())
}

struct Instance {
    map: GridMap,
    kernel: TransitionKernel,
    pa: ActionMatrix,
    kappa: f64,
    start: Cell,
    goals: Vec<(Cell, f64)>,
    horizon: usize,
}

impl Instance {
    fn flows(&self) -> FlowSet {
        let goal = goal_marginal(&self.map, &self.goals).unwrap();
        run_flows(&self.kernel, &self.pa, self.start, &[1.0; 9], &goal, self.horizon).unwrap()
    }
}

fn oracle_instances() -> Vec<Instance> {
    let mut r = rng(0xC1);
    let mut out = Vec::new();
    while out.len() < 20 {
        let (rows, cols) = (r.gen_range(2..=5), r.gen_range(2..=5));
        let map = random_map(&mut r, rows, cols, 0.2);
        let n_goals = r.gen_range(1..=3);
        let Some(cells) = free_cells(&mut r, &map, n_goals + 1) else { continue };
        let goals = cells[1..].iter().map(|&c| (c, r.gen_range(0.1..1.0))).collect();
        let kappa = r.gen_range(0.5..=1.0);
        let kernel = build_kernel(&map, &default_masks(kappa).unwrap()).unwrap();
        let pa = action_matrix(r.gen_range(0.0..=1.0)).unwrap();
        let horizon = r.gen_range(2..=8);
        out.push(Instance { map, kernel, pa, kappa, start: cells[0], goals, horizon });
    }
    out
}

/// 3×3 maps, each paired with every horizon 2..=4.
fn enumeration_instances() -> Vec<Instance> {
    let mut r = rng(0xC2);
    let mut out = Vec::new();
    while out.len() < 60 {
        let map = random_map(&mut r, 3, 3, 0.2);
        let Some(cells) = free_cells(&mut r, &map, 2) else { continue };
        let lambda = [0.0, 0.3, 0.7][r.gen_range(0..3)];
        let kappa = r.gen_range(0.5..=1.0);
        for horizon in 2..=4 {
            out.push(Instance {
                map: map.clone(),
                kernel: build_kernel(&map, &default_masks(kappa).unwrap()).unwrap(),
                pa: action_matrix(lambda).unwrap(),
                kappa,
                start: cells[0],
                goals: vec![(cells[1], 1.0)],
                horizon,
            });
        }
    }
    out
}

/// 100 feasible 15×15 maps with their BFS distance.
fn maze_instances() -> Vec<(GridMap, Cell, Cell, usize)> {
    let mut r = rng(0xC3);
    let mut out = Vec::new();
    while out.len() < 100 {
        let map = random_map(&mut r, 15, 15, 0.2);
        let Some(cells) = free_cells(&mut r, &map, 2) else { continue };
        if let Some(d) = bfs_distance(&map, cells[0], &[cells[1]]) {
            out.push((map, cells[0], cells[1], d));
        }
    }
    out
}

fn maze_flows(map: &GridMap, start: Cell, goal: Cell, d: usize) -> FlowSet {
    let kernel = build_kernel(map, &default_masks(0.8).unwrap()).unwrap();
    let pa = action_matrix(0.0).unwrap();
    let g = goal_marginal(map, &[(goal, 1.0)]).unwrap();
    run_flows(&kernel, &pa, start, &[1.0; 9], &g, (d + 1).max(2)).unwrap()
}

#[test]
fn criterion_1_oracle_equivalence() {
    let _g = serial();
    let clock = Instant::now();
    let mut worst: f64 = 0.0;
    for inst in oracle_instances() {
        let flows = inst.flows();
        let chain = DenseChain::new(&inst.kernel, &inst.pa, inst.start, &[1.0; 9], &dense_goal(&inst.map, &inst.goals)).unwrap();
        let dense = dense_messages(&chain, inst.horizon).unwrap();
        for t in 1..inst.horizon {
            worst = worst.max(max_abs_diff(flows.forward(t).values(), &dense.forward[t - 1]));
            worst = worst.max(max_abs_diff(flows.backward(t).values(), &dense.backward[t - 1]));
            worst = worst.max(max_abs_diff(flows.posterior(t).values(), &dense.posterior[t - 1]));
        }
        worst = worst.max(max_abs_diff(flows.forward_final().values(), &dense.forward_final));
        worst = worst.max(max_abs_diff(flows.posterior_final().values(), &dense.posterior_final));
    }
    let elapsed = clock.elapsed();
    let ok = worst <= 1e-12 && elapsed < Duration::from_secs(5);
    report(1, "oracle equivalence", ok, &format!("20 instances, max |Δ| = {worst:.2e}, {}", secs(elapsed)));
}

#[test]
fn criterion_2_enumeration_equivalence() {
    let _g = serial();
    let clock = Instant::now();
    let mut worst: f64 = 0.0;
    let (mut greedy_checked, mut greedy_optimal, mut same_cells) = (0, 0, 0);
    let mut misses = Vec::new();
    for inst in enumeration_instances() {
        let flows = inst.flows();
        let goal = dense_goal(&inst.map, &inst.goals);
        let trs = enumerate_paths(&inst.kernel, &inst.pa, inst.start, &[1.0; 9], &goal, inst.horizon).unwrap();
        let (joint, last) = enumerated_posteriors(&trs, &goal, &inst.map, inst.horizon);
        for t in 1..inst.horizon {
            worst = worst.max(max_abs_diff(flows.posterior(t).values(), &joint[t - 1]));
        }
        worst = worst.max(max_abs_diff(flows.posterior_final().values(), &last));

        // greedy at the minimum horizon against the best enumerated trajectory
        let goal_cell = inst.goals[0].0;
        let pa_row = inst.pa.row(Action::Still);
        let t_min = min_time(&inst.kernel, &inst.pa, inst.start, &goal_marginal(&inst.map, &inst.goals).unwrap(), 64);
        let Ok(t_min) = t_min else { continue };
        if t_min != inst.horizon {
            continue;
        }
        let trs = enumerate_paths(&inst.kernel, &inst.pa, inst.start, &pa_row, &goal, t_min).unwrap();
        let best = trs.iter().map(|t| t.likelihood).fold(0.0, f64::max);
        let scenario = Scenario::single_goal(inst.map.clone(), inst.start, goal_cell)
            .unwrap()
            .with_kernel_params(inst.kappa, inst.pa.stiffness())
            .with_horizon(Horizon::Fixed(t_min));
        let path = greedy_plan(&scenario).unwrap();
        let l = path_likelihood(&path, &scenario).unwrap().exp();
        greedy_checked += 1;
        if path.reached_goal && (l - best).abs() <= 1e-9 * best {
            greedy_optimal += 1;
        } else {
            misses.push(format!("T={t_min} greedy {l:.6e} vs best {best:.6e}"));
            // the greedy rule maximizes marginals, so it can pick a different
            // action labeling of the best cell sequence
            let cells = path.cells();
            if trs.iter().any(|t| t.cells == cells && (t.likelihood - best).abs() <= 1e-9 * best) {
                same_cells += 1;
            }
        }
    }
    let elapsed = clock.elapsed();
    let ok = worst <= 1e-9 && greedy_optimal == greedy_checked && elapsed < Duration::from_secs(30);
    let mut detail = format!(
        "max |Δ| = {worst:.2e}, greedy optimal {greedy_optimal}/{greedy_checked}, {}",
        secs(elapsed)
    );
    if let Some(m) = misses.first() {
        detail.push_str(&format!(
            "; {} misses, {same_cells} on the best cell sequence with other actions; first: {m}",
            misses.len()
        ));
    }
    report(2, "enumeration equivalence", ok, &detail);
}

#[test]
fn criterion_3_min_time() {
    let _g = serial();
    let clock = Instant::now();
    let mut hits = 0;
    for (map, start, goal, d) in maze_instances() {
        let kernel = build_kernel(&map, &default_masks(0.8).unwrap()).unwrap();
        let pa = action_matrix(0.0).unwrap();
        let g = goal_marginal(&map, &[(goal, 1.0)]).unwrap();
        if min_time(&kernel, &pa, start, &g, 4 * map.n_cells() + 1) == Ok(d + 1) {
            hits += 1;
        }
    }
    let elapsed = clock.elapsed();
    let ok = hits == 100 && elapsed < Duration::from_secs(10);
    report(3, "min-time correctness", ok, &format!("min_time - 1 == BFS on {hits}/100 maps, {}", secs(elapsed)));
}

#[test]
fn criterion_4_greedy_optimal_connected() {
    let _g = serial();
    let mut good = 0;
    let mut first_bad = None;
    for (k, (map, start, goal, d)) in maze_instances().into_iter().enumerate() {
        let scenario = Scenario::single_goal(map.clone(), start, goal).unwrap();
        let verdict = match greedy_plan(&scenario) {
            Ok(p) => match p.validate(&map) {
                Err(e) => Err(e),
                Ok(()) if !p.reached_goal => Err("goal not reached".to_string()),
                Ok(()) if p.transitions() != d => Err(format!("{} transitions, BFS {d}", p.transitions())),
                Ok(()) => Ok(()),
            },
            Err(e) => Err(e.to_string()),
        };
        match verdict {
            Ok(()) => good += 1,
            Err(e) => {
                first_bad.get_or_insert(format!("map {k}: {e}"));
            }
        }
    }
    let mut detail = format!("{good}/100 connected, goal-reaching, BFS-length paths");
    if let Some(b) = first_bad {
        detail.push_str(&format!("; {b}"));
    }
    report(4, "greedy optimality and connectivity", good == 100, &detail);
}

fn check_flow(flows: &FlowSet, map: &GridMap, failures: &mut usize) {
    let blocked: Vec<usize> = map.cells().filter(|&c| map.is_obstacle(c)).map(|c| map.index(c)).collect();
    let mut bad = |ok: bool| {
        if !ok {
            *failures += 1;
        }
    };
    for t in 1..flows.horizon() {
        bad((flows.forward(t).sum() - 1.0).abs() <= 1e-9);
        for m in [flows.forward(t), flows.backward(t), flows.posterior(t)] {
            bad(blocked.iter().all(|&ci| m.values()[ci * 9..(ci + 1) * 9].iter().all(|&v| v == 0.0)));
        }
    }
    bad((flows.forward_final().sum() - 1.0).abs() <= 1e-9);
    for m in [flows.forward_final(), flows.backward_final(), flows.posterior_final()] {
        bad(blocked.iter().all(|&ci| m.values()[ci] == 0.0));
    }
}

#[test]
fn criterion_5_normalization_and_support() {
    let _g = serial();
    let (mut flows_checked, mut failures) = (0, 0);
    for inst in oracle_instances().into_iter().chain(enumeration_instances()) {
        check_flow(&inst.flows(), &inst.map, &mut failures);
        flows_checked += 1;
    }
    for (map, start, goal, d) in maze_instances() {
        check_flow(&maze_flows(&map, start, goal, d), &map, &mut failures);
        flows_checked += 1;
    }
    report(
        5,
        "normalization and support",
        failures == 0,
        &format!("{flows_checked} flow sets, {failures} violations"),
    );
}

#[test]
fn criterion_6_multi_goal() {
    let _g = serial();
    let mut r = rng(0xC6);
    let (mut nearest, mut identical, mut n) = (0, 0, 0);
    while n < 20 {
        let map = random_map(&mut r, 15, 15, 0.2);
        let Some(cells) = free_cells(&mut r, &map, 4) else { continue };
        let (start, goals) = (cells[0], &cells[1..]);
        let Some(d) = bfs_distance(&map, start, goals) else { continue };
        if bfs_distance(&map, start, &goals[..1]).is_none() {
            continue;
        }
        n += 1;
        let weighted: Vec<(Cell, f64)> = goals.iter().map(|&g| (g, 1.0 / 3.0)).collect();
        // horizon long enough for the farthest goal, so every goal is on the table
        let far = goals.iter().filter_map(|&g| bfs_distance(&map, start, &[g])).max().unwrap();
        let scenario = Scenario::new(map.clone(), start, weighted).unwrap().with_horizon(Horizon::Fixed(far + 1));
        let path = greedy_plan(&scenario).unwrap();
        let reached = path.last_cell().unwrap();
        if path.reached_goal
            && path.validate(&map).is_ok()
            && goals.contains(&reached)
            && bfs_distance(&map, start, &[reached]) == Some(d)
        {
            nearest += 1;
        }
        // the same goal listed three times collapses to the single-goal planner
        let single = greedy_plan(&Scenario::single_goal(map.clone(), start, goals[0]).unwrap()).unwrap();
        let repeated = greedy_plan(&Scenario::new(map.clone(), start, vec![(goals[0], 1.0 / 3.0); 3]).unwrap()).unwrap();
        if single == repeated {
            identical += 1;
        }
    }
    report(
        6,
        "multi-goal",
        nearest == 20 && identical == 20,
        &format!("T from the farthest goal: BFS-nearest goal reached {nearest}/20, single-goal reduction identical {identical}/20"),
    );
}

fn world(text: &str) -> WorldSpec {
    match parse_scenario(text).unwrap() {
        Parsed::Multi(w) => w,
        Parsed::Single(_) => panic!("fixture is not a multi-agent world"),
    }
}

fn co_occupancy(trace: &[WorldState]) -> usize {
    trace
        .iter()
        .map(|s| {
            let cells: Vec<Cell> = s.poses.iter().map(|p| p.cell).collect();
            (0..cells.len()).flat_map(|i| (i + 1..cells.len()).map(move |j| (i, j))).filter(|&(i, j)| cells[i] == cells[j]).count()
        })
        .sum()
}

#[test]
fn criterion_7_multi_agent() {
    let _g = serial();
    let passage = world(include_str!("../fixtures/passage.txt"));
    let a = simulate(&passage.agents, &passage.map, &passage.config).unwrap();
    let again = simulate(&passage.agents, &passage.map, &passage.config).unwrap();
    let five = world(include_str!("../fixtures/five_agents.txt"));
    let b = simulate(&five.agents, &five.map, &five.config).unwrap();
    let deterministic = a.trace == again.trace && a.paths == again.paths;

    let passage_ok = a.status == SimStatus::Completed && a.wait_count() >= 1 && co_occupancy(&a.trace) == 0;
    let five_ok = five.config.t_max == 40
        && b.status == SimStatus::Completed
        && b.trace.len() <= 40
        && co_occupancy(&b.trace) == 0;
    report(
        7,
        "multi-agent safety and liveness",
        passage_ok && five_ok && deterministic,
        &format!(
            "passage: {:?} in {} slices, {} waits, {} overlaps; five agents: {:?} in {} slices, {} overlaps; repeat identical: {deterministic}",
            a.status,
            a.trace.len(),
            a.wait_count(),
            co_occupancy(&a.trace),
            b.status,
            b.trace.len(),
            co_occupancy(&b.trace)
        ),
    );
}

#[test]
fn criterion_8_performance() {
    let _g = serial();
    let map = GridMap::empty(100, 100).unwrap();
    let kernel = build_kernel(&map, &default_masks(0.8).unwrap()).unwrap();
    let pa = action_matrix(0.0).unwrap();
    let goal = goal_marginal(&map, &[(Cell::new(99, 99), 1.0)]).unwrap();
    let footprint = 27_000_000 * std::mem::size_of::<f64>();

    let base = CURRENT.load(Ordering::Relaxed);
    PEAK.store(base, Ordering::Relaxed);
    let clock = Instant::now();
    let flows = run_flows(&kernel, &pa, Cell::new(0, 0), &[1.0; 9], &goal, 100).unwrap();
    let elapsed = clock.elapsed();
    let peak = PEAK.load(Ordering::Relaxed) - base;
    assert!(flows.is_feasible());
    drop(flows);

    let ratio = peak as f64 / footprint as f64;
    let ok = elapsed < Duration::from_secs(10) && ratio <= 1.5;
    report(
        8,
        "performance",
        ok,
        &format!("100×100, T = 100: {}, peak {:.0} MB = {ratio:.2}× the 27M-value footprint", secs(elapsed), peak as f64 / 1e6),
    );
}

#[test]
fn criterion_9_sampling() {
    let _g = serial();
    let base = match parse_scenario(include_str!("../fixtures/maze15.txt")).unwrap() {
        Parsed::Single(s) => s,
        Parsed::Multi(_) => panic!("maze fixture is single-agent"),
    };
    let goals: Vec<Cell> = base.goals.iter().map(|g| g.0).collect();
    let d = bfs_distance(&base.map, base.start, &goals).unwrap();
    let t_min = base.resolve_horizon(&base.model().unwrap()).unwrap();

    let mut shortest = 0;
    for seed in 0..20 {
        let p = sample_path(&base.clone().with_horizon(Horizon::Fixed(t_min)).with_seed(seed)).unwrap();
        if p.reached_goal && p.validate(&base.map).is_ok() && p.transitions() == d {
            shortest += 1;
        }
    }
    let mut routes = std::collections::BTreeSet::new();
    for seed in 0..20 {
        let p = sample_path(&base.clone().with_horizon(Horizon::Fixed(t_min + 12)).with_seed(seed)).unwrap();
        if p.reached_goal && p.validate(&base.map).is_ok() {
            let mut cells = p.cells();
            cells.dedup();
            routes.insert(cells);
        }
    }
    report(
        9,
        "sampling",
        shortest == 20 && routes.len() >= 2,
        &format!("T_min = {t_min}: {shortest}/20 minimum-length; T_min + 12: {} distinct routes", routes.len()),
    );
}
