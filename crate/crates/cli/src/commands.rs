use std::collections::BTreeMap;
use std::path::Path;

use navsynth::controller::{Episode, EpisodeSpec, Outcome, StubReasoner};
use navsynth::dataset::{self, format_stage1, segment_stage2, DatasetError, Record};
use navsynth::env::{generate_map, Event, GridMap};
use navsynth::explore::{astar_trajectory, build_exploration_trajectory};
use navsynth::metrics::{self, summarize_all, tau_sweep, MetricsError, MetricsReport};
use navsynth::synth::{collect_rollouts, irft_round};
use serde::Serialize;

use crate::output::{echo_config, write_atomic, write_json, write_text};
use crate::settings::Settings;
use crate::{CliError, Stage};

fn generate(s: &Settings) -> Result<Vec<GridMap>, CliError> {
    let spec = s.map_gen_spec();
    (0..s.map_gen.count).map(|i| generate_map(&spec, i).map_err(|e| CliError::Config(e.to_string()))).collect()
}

fn read_map_dir(dir: &Path) -> Result<Vec<GridMap>, CliError> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "map"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Config(format!("no .map files in {}", dir.display())));
    }
    paths
        .iter()
        .map(|p| {
            let name = p.file_stem().and_then(|s| s.to_str()).unwrap_or("map");
            let text = std::fs::read_to_string(p)?;
            GridMap::from_ascii(name, &text).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))
        })
        .collect()
}

fn write_maps(dir: &Path, maps: &[GridMap]) -> Result<(), CliError> {
    for m in maps {
        let text = m.to_ascii();
        let back = GridMap::from_ascii(m.name(), &text).map_err(|e| CliError::Data(format!("{}: {e}", m.name())))?;
        if back.to_ascii() != text {
            return Err(CliError::Data(format!("{} does not survive a round trip", m.name())));
        }
        write_text(&dir.join(format!("{}.map", m.name())), &text)?;
    }
    Ok(())
}

/// Loads or generates the suite's maps. Generated maps are also written to
/// `<out>/maps` so later commands can read them back.
fn suite_maps(s: &Settings, out: &Path) -> Result<Vec<GridMap>, CliError> {
    match &s.maps {
        Some(dir) => read_map_dir(dir),
        None => {
            let maps = generate(s)?;
            write_maps(&out.join("maps"), &maps)?;
            Ok(maps)
        }
    }
}

fn suite_specs(s: &Settings, maps: &[GridMap]) -> Result<Vec<EpisodeSpec>, CliError> {
    let mut specs = Vec::with_capacity(s.episodes);
    for i in 0..s.episodes {
        match EpisodeSpec::sample(maps, s.seed, i, s.min_start_distance) {
            Some(spec) => specs.push(spec),
            None => eprintln!("episode {i}: no valid start on map {}", maps[i % maps.len()].name()),
        }
    }
    if specs.is_empty() {
        return Err(CliError::Config("no episode could be sampled from the maps".into()));
    }
    Ok(specs)
}

fn write_records<T: Record>(path: &Path, records: &[T]) -> Result<(), CliError> {
    write_atomic(path, |w| dataset::write_jsonl(w, records))
}

pub fn map_gen(s: &Settings, out: &Path) -> Result<(), CliError> {
    let maps = generate(s)?;
    write_maps(out, &maps)?;
    echo_config(out, s)?;
    println!("wrote {} maps to {}", maps.len(), out.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct RolloutReport {
    n_episodes: usize,
    n_faulted: usize,
    n_success: usize,
    sr: f64,
    outcomes: BTreeMap<String, usize>,
    stagnation_events: usize,
    forced_obs: usize,
    slow_steps: usize,
    steps: usize,
}

impl RolloutReport {
    fn new(episodes: &[Episode], n_faulted: usize) -> Self {
        let mut outcomes = BTreeMap::new();
        for ep in episodes {
            *outcomes.entry(format!("{:?}", ep.outcome)).or_insert(0) += 1;
        }
        let events = |f: fn(&Event) -> bool| episodes.iter().flat_map(|e| &e.steps).flat_map(|s| &s.events).filter(|e| f(e)).count();
        let n_success = episodes.iter().filter(|e| e.outcome == Outcome::Success).count();
        let n = episodes.len() + n_faulted;
        Self {
            n_episodes: n,
            n_faulted,
            n_success,
            sr: if n == 0 { 0.0 } else { n_success as f64 / n as f64 },
            outcomes,
            stagnation_events: events(|e| matches!(e, Event::Stagnation { .. })),
            forced_obs: events(|e| matches!(e, Event::ForcedObs)),
            slow_steps: episodes.iter().map(Episode::slow_steps).sum(),
            steps: episodes.iter().map(|e| e.steps.len()).sum(),
        }
    }
}

pub fn rollout(s: &Settings, out: &Path) -> Result<(), CliError> {
    let maps = suite_maps(s, out)?;
    let specs = suite_specs(s, &maps)?;
    let results = collect_rollouts(
        &maps,
        &specs,
        &s.policy_spec()?,
        &s.reasoner_spec()?,
        &s.controller(),
        s.trigger.then_some(&s.stagnation),
        s.jobs,
    );
    let mut episodes = Vec::new();
    let mut faulted = 0;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(ep) => episodes.push(ep),
            Err(e) => {
                faulted += 1;
                eprintln!("episode {i}: {e}");
            }
        }
    }
    let report = RolloutReport::new(&episodes, faulted);
    write_records(&out.join("episodes.jsonl"), &episodes)?;
    write_json(&out.join("report.json"), &report)?;
    echo_config(out, s)?;
    println!("{} episodes, SR {:.4}", report.n_episodes, report.sr);
    Ok(())
}

#[derive(Debug, Serialize)]
struct SynthReport {
    stage: &'static str,
    n_trajectories: usize,
    n_failed: usize,
    n_records: usize,
}

pub fn synth(s: &Settings, stage: Stage, out: &Path) -> Result<(), CliError> {
    let maps = suite_maps(s, out)?;
    let specs = suite_specs(s, &maps)?;
    match stage {
        Stage::Stage1 | Stage::Stage2 => {
            let mut conversations = Vec::new();
            let mut segments = Vec::new();
            let mut failed = 0;
            let reasoner = StubReasoner::new();
            for (i, spec) in specs.iter().enumerate() {
                let map = &maps[spec.map];
                let built = match stage {
                    Stage::Stage1 => astar_trajectory(map, &spec.start, spec.goal, spec.seed)
                        .map_err(|e| e.to_string())
                        .and_then(|t| format_stage1(map, &t).map_err(|e| e.to_string()))
                        .map(|rec| conversations.push(rec)),
                    _ => build_exploration_trajectory(map, &spec.start, spec.goal, spec.seed)
                        .map_err(|e| e.to_string())
                        .map(|ex| segments.extend(segment_stage2(map, &ex.trajectory, &s.segments(), &reasoner))),
                };
                if let Err(e) = built {
                    failed += 1;
                    eprintln!("episode {i}: {e}");
                }
            }
            let check = |r: Result<(), String>| r.map_err(|e| CliError::Data(format!("generated record is invalid: {e}")));
            conversations.iter().try_for_each(|r| check(r.validate()))?;
            segments.iter().try_for_each(|r| check(r.validate()))?;
            let (name, n_records) = if matches!(stage, Stage::Stage1) {
                write_records(&out.join("stage1.jsonl"), &conversations)?;
                ("stage1", conversations.len())
            } else {
                write_records(&out.join("stage2.jsonl"), &segments)?;
                ("stage2", segments.len())
            };
            let report = SynthReport { stage: name, n_trajectories: specs.len() - failed, n_failed: failed, n_records };
            write_json(&out.join("report.json"), &report)?;
            println!("{name}: {n_records} records from {} trajectories", report.n_trajectories);
        }
        Stage::Irft => {
            let round =
                irft_round(&maps, &specs, &s.policy_spec()?, &s.reasoner_spec()?, &s.controller(), &s.stagnation, s.jobs);
            for (i, r) in round.raw.iter().enumerate() {
                if let Err(e) = r {
                    eprintln!("episode {i}: {e}");
                }
            }
            write_records(&out.join("irft.jsonl"), &round.dataset)?;
            write_json(&out.join("round_report.json"), &round.report)?;
            println!(
                "irft: {} kept, {} repaired, SR {:.4} -> {:.4}",
                round.report.n_success_raw, round.report.n_repaired, round.report.sr_raw, round.report.sr_final
            );
        }
    }
    echo_config(out, s)
}

fn load_rows(s: &Settings, logs: &Path, out: &Path) -> Result<Vec<metrics::EpisodeSummary>, CliError> {
    let file = std::fs::File::open(logs).map_err(|e| CliError::Config(format!("cannot open {}: {e}", logs.display())))?;
    let episodes: Vec<Episode> = dataset::read_jsonl(std::io::BufReader::new(file)).map_err(|e| match e {
        DatasetError::Io(e) => CliError::Io(e),
        other => CliError::Data(format!("{}: {other}", logs.display())),
    })?;
    let maps: BTreeMap<String, GridMap> = suite_maps(s, out)?.into_iter().map(|m| (m.name().to_string(), m)).collect();
    summarize_all(&maps, &episodes, &s.time_model()).map_err(|e| CliError::Data(e.to_string()))
}

pub fn eval(s: &Settings, logs: &Path, out: &Path) -> Result<(), CliError> {
    let rows = load_rows(s, logs, out)?;
    let report = MetricsReport::new(rows, s.tau);
    write_atomic(&out.join("metrics.csv"), |w| report.write_csv(w))?;
    echo_config(out, s)?;
    println!("SR {:.4}  SPL {:.4}  SOT {:.4} (tau {})", report.sr, report.spl, report.sot, report.tau);
    Ok(())
}

pub fn sweep_tau(s: &Settings, logs: &Path, out: &Path) -> Result<(), CliError> {
    if s.tau_grid.is_empty() {
        return Err(CliError::Usage("--tau-grid is empty".into()));
    }
    let rows = load_rows(s, logs, out)?;
    let sweep = tau_sweep(&rows, &s.tau_grid).map_err(|e| match e {
        MetricsError::BadTauGrid => CliError::Usage(e.to_string()),
        other => CliError::Data(other.to_string()),
    })?;
    write_atomic(&out.join("sweep.csv"), |w| metrics::write_sweep_csv(&sweep, w))?;
    echo_config(out, s)?;
    for r in &sweep {
        println!("tau {:<8} SOT {:.4}", r.tau, r.sot);
    }
    Ok(())
}
