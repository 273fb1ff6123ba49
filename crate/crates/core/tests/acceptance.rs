//! Acceptance gate. Runs every headline criterion at its tolerance and prints
//! one PASS/FAIL line each; exits non-zero if any fails.
//!
//! Built with `harness = false` so the lines are visible in plain
//! `cargo test` output. `ACCEPT_ONLY=<substring>` runs a subset.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use doodle_core::agent::{
    ddqn_update, evaluate, initial_network, pretrain, rollout, train_rl, Exploration, GreedyPolicy, PretrainConfig,
    PretrainOutcome, QModel, RlConfig,
};
use doodle_core::data::{synthesize_demo_episode, synthesize_demo_set, DemoConfig, PerConfig, PrioritizedReplay, StrokeBank, SumTree, Transition};
use doodle_core::nn::{AdamConfig, NetConfig, NetInput, QNetwork};
use doodle_core::{Action, ActionSpec, Canvas, EpisodeState, MediaType, Observation, PenMode, Point, RewardParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn random_point(rng: &mut ChaCha8Rng, side: usize) -> Point {
    Point::new(rng.random_range(0..side as i32), rng.random_range(0..side as i32))
}

/// Reference with a few random strokes in every pen color of the medium.
fn random_reference(rng: &mut ChaCha8Rng, side: usize, media: MediaType) -> Canvas {
    let mut c = Canvas::new(side, media).unwrap();
    let inks: Vec<PenMode> = media.pen_modes().iter().copied().filter(|m| m.is_down()).collect();
    for _ in 0..rng.random_range(1..6) {
        let ink = inks[rng.random_range(0..inks.len())];
        let (a, b) = (random_point(rng, side), random_point(rng, side));
        c.render_segment(a, b, ink, &media.default_brush()).unwrap();
    }
    c
}

// ---------------------------------------------------------------------------
// Shapes

fn shapes() -> Outcome {
    let expected = [
        (MediaType::Sketch, [84, 84, 4], [11, 11, 2], 242),
        (MediaType::ColorSketch, [84, 84, 8], [11, 11, 6], 484),
        (MediaType::Watercolor, [84, 84, 8], [11, 11, 6], 484),
    ];
    let mut seen = Vec::new();
    for (media, global, local, actions) in expected {
        let reference = Arc::new(Canvas::new(84, media).unwrap());
        let obs = EpisodeState::reset(reference, None, 100).unwrap().observe();
        let planes = (obs.global_planes().len(), obs.local_planes().len());
        let net_out = NetConfig::standard(media).actions();
        let ok = obs.global_shape() == global
            && obs.local_shape() == local
            && planes == (global.iter().product(), local.iter().product())
            && ActionSpec::new(media).total() == actions
            && net_out == actions;
        if !ok {
            return Err(format!(
                "{}: global {:?} local {:?} actions {}",
                media.name(),
                obs.global_shape(),
                obs.local_shape(),
                ActionSpec::new(media).total()
            ));
        }
        seen.push(format!("{} {:?}/{:?}/{}", media.name(), global, local, actions));
    }
    Ok(seen.join(", "))
}

// ---------------------------------------------------------------------------
// Rewards

/// `Σ (P − P_ref)² / L²` over every pixel and channel, in floating point.
fn similarity_oracle(canvas: &Canvas, reference: &Canvas) -> f64 {
    let side = canvas.side();
    let mut sum = 0.0;
    for y in 0..side as i32 {
        for x in 0..side as i32 {
            let p = Point::new(x, y);
            for (a, b) in canvas.pixel(p).iter().zip(reference.pixel(p)) {
                let d = *a as f64 - *b as f64;
                sum += d * d;
            }
        }
    }
    sum / (side * side) as f64
}

fn nearest_primary(px: &[u8]) -> usize {
    let primaries = [[255.0, 0.0, 0.0], [0.0, 255.0, 0.0], [0.0, 0.0, 255.0]];
    let dist = |q: &[f64; 3]| -> f64 { q.iter().zip(px).map(|(a, &b)| (a - b as f64).powi(2)).sum() };
    (0..3).min_by(|&i, &j| dist(&primaries[i]).total_cmp(&dist(&primaries[j]))).unwrap()
}

/// Expected total reward of `action` taken in `state`, recomputed from scratch.
fn reward_oracle(state: &EpisodeState, action: Action, params: &RewardParams) -> f64 {
    let reference = state.reference();
    let side = reference.side() as i32;
    let from = state.pen();
    let to = Point::new((from.x + action.dx).clamp(0, side - 1), (from.y + action.dy).clamp(0, side - 1));
    let before = state.canvas().clone();
    let mut after = before.clone();
    let mut penalty = 0.0;
    if action.mode.is_down() {
        after.render_segment(from, to, action.mode, state.brush()).unwrap();
        let moved = (to.x - from.x).abs().max((to.y - from.y).abs());
        if moved < params.min_draw_step {
            penalty += params.step_penalty;
        }
        let wanted = match action.mode {
            PenMode::Red => Some(0),
            PenMode::Green => Some(1),
            PenMode::Blue => Some(2),
            _ => None,
        };
        if let Some(wanted) = wanted {
            let white = vec![255u8; reference.channels()];
            let present = reference
                .segment_footprint(from, to, state.brush())
                .unwrap()
                .into_iter()
                .map(|p| reference.pixel(p))
                .any(|px| px != white.as_slice() && nearest_primary(px) == wanted);
            if !present {
                penalty += params.beta * params.color_penalty;
            }
        }
    } else if to != from {
        penalty += params.step_penalty;
    }
    similarity_oracle(&before, reference) - similarity_oracle(&after, reference) + penalty
}

fn reward_oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let medias = [MediaType::Sketch, MediaType::ColorSketch, MediaType::Watercolor];
    let mut worst: f64 = 0.0;
    let mut trials = 0;
    for side in [28usize, 84] {
        for _ in 0..500 {
            let media = medias[rng.random_range(0..medias.len())];
            let params = RewardParams::for_media(media);
            let reference = Arc::new(random_reference(&mut rng, side, media));
            let start = random_point(&mut rng, side);
            let mut state = EpisodeState::reset(reference, Some(start), 64).unwrap();
            let total = ActionSpec::new(media).total();
            for _ in 0..rng.random_range(0..30) {
                state.step_index_action(rng.random_range(0..total), &params).unwrap();
            }
            let action = Action::from_index(rng.random_range(0..total), media).unwrap();
            let expected = reward_oracle(&state, action, &params);
            let got = state.step(action, &params).unwrap().reward.total();
            let err = (got - expected).abs() / expected.abs().max(1.0);
            worst = worst.max(err);
            if !rel_close(got, expected, 1e-9) {
                return Err(format!("L={side} {} {action:?}: env {got} oracle {expected}", media.name()));
            }
            trials += 1;
        }
    }
    Ok(format!("{trials} triples, worst rel err {worst:.1e}"))
}

fn telescoping() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let media = if i % 2 == 0 { MediaType::Sketch } else { MediaType::ColorSketch };
        let side = if i % 4 < 2 { 28 } else { 84 };
        let params = RewardParams::for_media(media);
        let reference = Arc::new(random_reference(&mut rng, side, media));
        let mut state = EpisodeState::reset(Arc::clone(&reference), None, 100).unwrap();
        let s0 = state.similarity();
        let total = ActionSpec::new(media).total();
        let mut sum = 0.0;
        while !state.is_terminal() {
            let out = state.step_index_action(rng.random_range(0..total), &params).unwrap();
            sum += out.reward.pixel;
        }
        let expected = s0 - similarity_oracle(state.canvas(), &reference);
        let err = (sum - expected).abs() / expected.abs().max(1.0);
        worst = worst.max(err);
        if err > 1e-12 {
            return Err(format!("trajectory {i}: Σ r_pixel {sum} vs s0 − sN {expected}"));
        }
    }
    Ok(format!("100 trajectories, worst rel err {worst:.1e}"))
}

// ---------------------------------------------------------------------------
// Network gradients

fn observations(media: MediaType, n: usize, rng: &mut ChaCha8Rng) -> Vec<Observation> {
    let reference = Arc::new(random_reference(rng, 28, media));
    let mut state = EpisodeState::reset(reference, Some(random_point(rng, 28)), 1000).unwrap();
    let params = RewardParams::for_media(media);
    let total = ActionSpec::new(media).total();
    for _ in 0..rng.random_range(5..20) {
        state.step_index_action(rng.random_range(0..total), &params).unwrap();
    }
    (0..n)
        .map(|_| state.step_index_action(rng.random_range(0..total), &params).unwrap().observation)
        .collect()
}

fn gradient_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let (h, per_tensor) = (1e-5, 24);
    let mut checked_total = 0;
    let mut worst: f64 = 0.0;
    for media in [MediaType::Sketch, MediaType::ColorSketch] {
        let mut net = QNetwork::new(NetConfig::desk(media), &mut rng).unwrap();
        for v in net.params_mut() {
            *v += rng.random_range(-0.05..0.05);
        }
        let obs = observations(media, 3, &mut rng);
        let input = NetInput::from_observations(net.config(), &obs.iter().collect::<Vec<_>>()).unwrap();
        let pass = net.forward(&input).unwrap();
        let dq: Vec<f64> = (0..pass.q().len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let grads = net.backward(&pass, &dq).unwrap();
        let pattern = pass.relu_pattern();
        for info in net.layout().to_vec() {
            let (mut checked, mut tries) = (0, 0);
            while checked < per_tensor && tries < 2000 {
                tries += 1;
                let i = info.offset + rng.random_range(0..info.len());
                let orig = net.params()[i];
                let mut loss_at = |v: f64| {
                    net.params_mut()[i] = v;
                    let p = net.forward(&input).unwrap();
                    let loss: f64 = p.q().iter().zip(&dq).map(|(a, b)| a * b).sum();
                    (loss, p.relu_pattern() == pattern)
                };
                let (up, smooth_up) = loss_at(orig + h);
                let (down, smooth_down) = loss_at(orig - h);
                net.params_mut()[i] = orig;
                // A ReLU switching inside the stencil makes the difference meaningless.
                if !(smooth_up && smooth_down) {
                    continue;
                }
                let numeric = (up - down) / (2.0 * h);
                let err = (numeric - grads[i]).abs();
                let scale = numeric.abs().max(grads[i].abs());
                if err > 1e-6 && err > 1e-4 * scale {
                    return Err(format!("{} {}[{i}]: analytic {} numeric {numeric}", media.name(), info.name, grads[i]));
                }
                worst = worst.max(err / scale.max(1e-6));
                checked += 1;
            }
            if checked < per_tensor {
                return Err(format!("{} {}: only {checked} smooth coordinates", media.name(), info.name));
            }
            checked_total += checked;
        }
    }
    Ok(format!("{checked_total} coordinates, worst err {worst:.1e} (relative, floor 1e-6)"))
}

// ---------------------------------------------------------------------------
// Prioritized replay

fn per_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let capacity = 1000;
    let mut tree = SumTree::new(capacity).unwrap();
    let mut brute = vec![0.0; capacity];
    for op in 0..10_000 {
        let leaf = rng.random_range(0..capacity);
        let v = if rng.random_bool(0.1) { 0.0 } else { rng.random_range(0.0..100.0) };
        tree.set(leaf, v).unwrap();
        brute[leaf] = v;
        let sum: f64 = brute.iter().sum();
        if !rel_close(tree.total(), sum, 1e-9) {
            return Err(format!("op {op}: root {} brute {sum}", tree.total()));
        }
    }

    let cfg = PerConfig {
        capacity: 4,
        alpha: 1.0,
        ..PerConfig::default()
    };
    let mut replay = PrioritizedReplay::new(cfg).unwrap();
    for p in 1..=4 {
        replay.insert(p, p as f64).unwrap();
    }
    let draws = 100_000;
    let mut counts = [0usize; 4];
    for _ in 0..draws {
        let s = replay.sample(1, 1.0, &mut rng).unwrap();
        counts[s[0].index] += 1;
    }
    let freqs: Vec<f64> = counts.iter().map(|&c| c as f64 / draws as f64).collect();
    let ok = freqs.iter().enumerate().all(|(i, f)| (f - (i + 1) as f64 / 10.0).abs() <= 0.01);
    let freq_text = freqs.iter().map(|f| format!("{f:.4}")).collect::<Vec<_>>().join(", ");
    check(ok, format!("root exact over 10^4 ops; frequencies ({freq_text})"))
}

// ---------------------------------------------------------------------------
// Double DQN on a known MDP

#[derive(Clone)]
struct Table {
    q: Vec<f64>,
}

impl QModel for Table {
    type Obs = usize;
    /// Visited states and their rows of Q.
    type Pass = (Vec<usize>, Vec<f64>);

    fn actions(&self) -> usize {
        2
    }

    fn forward(&self, obs: &[&usize]) -> doodle_core::Result<Self::Pass> {
        let states: Vec<usize> = obs.iter().map(|&&s| s).collect();
        let q = states.iter().flat_map(|&s| [self.q[s * 2], self.q[s * 2 + 1]]).collect();
        Ok((states, q))
    }

    fn q<'p>(&self, pass: &'p Self::Pass) -> &'p [f64] {
        &pass.1
    }

    fn backward(&self, pass: &Self::Pass, grad_q: &[f64]) -> doodle_core::Result<Vec<f64>> {
        let mut g = vec![0.0; self.q.len()];
        for (b, &s) in pass.0.iter().enumerate() {
            for a in 0..2 {
                g[s * 2 + a] += grad_q[b * 2 + a];
            }
        }
        Ok(g)
    }

    fn params(&self) -> &[f64] {
        &self.q
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.q
    }
}

fn ddqn_toy_mdp() -> Outcome {
    // next[s][a], reward[s][a]; deterministic, never terminal.
    let next = [[0usize, 1], [0, 1]];
    let reward = [[0.0, 1.0], [2.0, 0.0]];
    let gamma = 0.9;
    let mut q_star = [[0.0f64; 2]; 2];
    for _ in 0..2000 {
        let v = [q_star[0][0].max(q_star[0][1]), q_star[1][0].max(q_star[1][1])];
        for s in 0..2 {
            for a in 0..2 {
                q_star[s][a] = reward[s][a] + gamma * v[next[s][a]];
            }
        }
    }

    let transitions: Vec<Transition<usize>> = (0..4)
        .map(|i| {
            let (s, a) = (i / 2, i % 2);
            Transition {
                obs: s,
                action: a,
                reward: reward[s][a],
                next_obs: next[s][a],
                terminal: false,
            }
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut online = Table { q: vec![0.0; 4] };
    let mut target = online.clone();
    let (lr, sync, max_updates) = (0.5, 25, 5000);
    let sup = |t: &Table| (0..4).map(|i| (t.q[i] - q_star[i / 2][i % 2]).abs()).fold(0.0, f64::max);
    let mut converged_at = None;
    for update in 1..=max_updates {
        let batch: Vec<(&Transition<usize>, f64)> = (0..4).map(|_| (&transitions[rng.random_range(0..4)], 1.0)).collect();
        let step = ddqn_update(&online, &target, &batch, gamma).unwrap();
        for (p, g) in online.q.iter_mut().zip(&step.grads) {
            *p -= lr * g;
        }
        if update % sync == 0 {
            target = online.clone();
        }
        if converged_at.is_none() && sup(&online) <= 0.05 {
            converged_at = Some(update);
        }
    }
    let err = sup(&online);
    check(
        err <= 0.05,
        format!("sup |Q − Q*| = {err:.4} after {max_updates} updates (first within 0.05 at {converged_at:?}); Q* = {q_star:.3?}"),
    )
}

// ---------------------------------------------------------------------------
// Demonstrations and pretraining

/// Desk-scale demonstration data: two short fixed-step strokes per
/// reference, at least 5k labeled steps.
fn desk_demos(rng: &mut ChaCha8Rng) -> (StrokeBank, Vec<doodle_core::data::DemoEpisode>) {
    let bank = StrokeBank::fixed_step(rng, 256, 5, 2).unwrap();
    let demos = synthesize_demo_set(&bank, rng, &DemoConfig::new(28, MediaType::Sketch), 5000).unwrap();
    (bank, demos)
}

/// Pretraining runs are memoized per seed; efficacy and stage ordering share seed 0.
fn desk_pretrain(seed: u64) -> (StrokeBank, PretrainOutcome) {
    static CACHE: Mutex<BTreeMap<u64, (StrokeBank, PretrainOutcome)>> = Mutex::new(BTreeMap::new());
    if let Some(hit) = CACHE.lock().unwrap().get(&seed) {
        return hit.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (bank, demos) = desk_demos(&mut rng);
    let net = QNetwork::new(NetConfig::desk(MediaType::Sketch), &mut rng).unwrap();
    let out = pretrain(net, &demos, &PretrainConfig::default(), &mut rng).unwrap();
    CACHE.lock().unwrap().insert(seed, (bank.clone(), out.clone()));
    (bank, out)
}

fn demo_replay() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut n = 0;
    for media in [MediaType::Sketch, MediaType::ColorSketch, MediaType::Watercolor] {
        for side in [28usize, 84] {
            let extent = side as i32 / 2;
            let banks = [
                StrokeBank::procedural(&mut rng, 64, extent).unwrap(),
                StrokeBank::fixed_step(&mut rng, 64, 5, 3).unwrap(),
            ];
            for bank in &banks {
                for start_on_stroke in [true, false] {
                    let cfg = DemoConfig {
                        start_on_stroke,
                        ..DemoConfig::new(side, media)
                    };
                    for _ in 0..25 {
                        let ep = synthesize_demo_episode(bank, &mut rng, &cfg).unwrap();
                        let mut state = EpisodeState::reset(Arc::clone(&ep.reference), Some(ep.start), ep.actions.len()).unwrap();
                        let params = RewardParams::for_media(media);
                        for &a in &ep.actions {
                            state.step(a, &params).unwrap();
                        }
                        if state.canvas().pixels() != ep.reference.pixels() {
                            return Err(format!("{} L={side}: episode {n} does not replay", media.name()));
                        }
                        n += 1;
                    }
                }
            }
        }
    }
    Ok(format!("{n}/{n} episodes replay pixel-exactly"))
}

fn pretraining_efficacy() -> Outcome {
    let t = Instant::now();
    let (_, out) = desk_pretrain(0);
    let last = out.metrics.last().unwrap();
    let acc = last.val_accuracy.unwrap();
    check(
        acc >= 0.90,
        format!(
            "held-out accuracy {acc:.3} (train {:.3}) on {} held-out samples after {} epochs, {:.0}s",
            last.train_accuracy,
            out.val_samples,
            out.metrics.len(),
            t.elapsed().as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------------------
// Stage ordering

struct Arms {
    rl_pretrained: f64,
    pretrained: f64,
    rl_rare: f64,
    rl_naive: f64,
}

/// Rewards at this scale run to hundreds per step; scaling them by 0.01
/// keeps the first TD errors from overwriting the pretrained ranking.
fn desk_rl_config() -> RlConfig {
    RlConfig {
        total_frames: 20_000,
        eval_every: 0,
        reward_scale: 0.01,
        update_every: 4,
        target_sync: 250,
        adam: AdamConfig {
            lr: 1e-4,
            ..AdamConfig::default()
        },
        ..RlConfig::default()
    }
}

fn stage_arms(seed: u64) -> Arms {
    let (bank, pre) = desk_pretrain(seed);
    let cfg = DemoConfig::new(28, MediaType::Sketch);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut references = |n: usize| -> Vec<Arc<Canvas>> {
        (0..n).map(|_| synthesize_demo_episode(&bank, &mut rng, &cfg).unwrap().reference).collect()
    };
    let train_refs = references(200);
    let test_refs = references(50);
    let net_cfg = NetConfig::desk(MediaType::Sketch);
    let score = |net: &QNetwork| evaluate(net, &test_refs, 100, 7).unwrap().mean_accumulated;

    let base = desk_rl_config();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa11);
    let mut run = |cfg: RlConfig, init: Option<&QNetwork>| {
        let start = initial_network(&net_cfg, init, &cfg, &mut rng).unwrap();
        score(&train_rl(&start, &train_refs, &cfg, &mut rng).unwrap().net)
    };
    let rl_pretrained = run(base, Some(&pre.net));
    let scratch = RlConfig {
        use_pretrained_init: false,
        ..base
    };
    let rl_rare = run(scratch, None);
    let rl_naive = run(
        RlConfig {
            exploration: Exploration::naive(),
            ..scratch
        },
        None,
    );
    Arms {
        rl_pretrained,
        pretrained: score(&pre.net),
        rl_rare,
        rl_naive,
    }
}

fn stage_ordering() -> Outcome {
    let seeds = [0u64, 1, 2];
    let mut mean = [0.0; 4];
    let mut rows = Vec::new();
    for &seed in &seeds {
        let t = Instant::now();
        let a = stage_arms(seed);
        let v = [a.rl_pretrained, a.pretrained, a.rl_rare, a.rl_naive];
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x / seeds.len() as f64;
        }
        let row = format!("seed {seed}: {:.1} / {:.1} / {:.1} / {:.1} ({:.0}s)", v[0], v[1], v[2], v[3], t.elapsed().as_secs_f64());
        println!("    {row}");
        rows.push(row);
    }
    let ordered = mean.windows(2).all(|w| w[0] > w[1]);
    check(
        ordered,
        format!(
            "mean over {} seeds, pretrained+RL {:.1} > pretrained {:.1} > RL rare {:.1} > RL naive {:.1}",
            seeds.len(),
            mean[0],
            mean[1],
            mean[2],
            mean[3]
        ),
    )
}

// ---------------------------------------------------------------------------
// Determinism

fn determinism() -> Outcome {
    let small = |seed: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bank = StrokeBank::fixed_step(&mut rng, 32, 5, 2).unwrap();
        let demos = synthesize_demo_set(&bank, &mut rng, &DemoConfig::new(28, MediaType::Sketch), 300).unwrap();
        let net = QNetwork::new(NetConfig::desk(MediaType::Sketch), &mut rng).unwrap();
        let cfg = PretrainConfig {
            epochs: 2,
            augment: 2,
            ..PretrainConfig::default()
        };
        let pre = pretrain(net, &demos, &cfg, &mut rng).unwrap();
        let refs: Vec<Arc<Canvas>> = demos.iter().take(8).map(|d| Arc::clone(&d.reference)).collect();
        let rl = RlConfig {
            total_frames: 600,
            warmup_frames: 100,
            eval_every: 0,
            ..RlConfig::default()
        };
        let start = initial_network(pre.net.config(), Some(&pre.net), &rl, &mut rng).unwrap();
        let trained = train_rl(&start, &refs, &rl, &mut rng).unwrap().net;
        let mut policy = GreedyPolicy::new(&trained, 3);
        let roll = rollout(&mut policy, Arc::clone(&refs[0]), 100).unwrap();
        (pre.net.params().to_vec(), trained.params().to_vec(), roll.actions, roll.frames.last().unwrap().clone())
    };
    let (a, b) = (small(9), small(9));
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    check(
        bits(&a.0) == bits(&b.0) && bits(&a.1) == bits(&b.1) && a.2 == b.2 && a.3 == b.3,
        format!("pretrain, train and rollout bit-identical across two runs ({} params)", a.0.len()),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("shape conformance", shapes),
        ("reward oracle equivalence", reward_oracle_equivalence),
        ("telescoping invariant", telescoping),
        ("gradient checks", gradient_checks),
        ("PER correctness", per_correctness),
        ("DDQN oracle equivalence", ddqn_toy_mdp),
        ("demo replay consistency", demo_replay),
        ("determinism", determinism),
        ("pretraining efficacy", pretraining_efficacy),
        ("stage ordering", stage_ordering),
    ];
    let only = std::env::var("ACCEPT_ONLY").ok();
    let mut failed = 0;
    for (name, run) in criteria {
        if only.as_deref().is_some_and(|o| !name.contains(o)) {
            continue;
        }
        let t = Instant::now();
        let outcome = run();
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name} [{secs:.1}s]: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name} [{secs:.1}s]: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
