//! Command implementations shared by the binary and the tests.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use coopmud::analysis::{
    asymptotic_efficiency_two_user, large_system_decorrelator, large_system_mmse,
    large_system_optimal, optimal_coding_set_size, special_case_avg_ber, spectral_efficiency,
    MudMode, PowerDistribution, SpecialCaseParams,
};
use coopmud::detectors::DetectorKind;
use coopmud::harness::{run_sweep, SweepTable};
use coopmud::protocols::{
    bound_mimo_mud, bound_perfect_source_relay, bound_perfect_source_relay_optimal,
    bound_perfect_source_relay_optimal_random,
};
use coopmud::sysmodel::correlation_two_user;
use serde_json::json;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{commit_dir, content_hash, render_csvs, series_json};
use crate::presets::{preset, PRESET_IDS};

/// Runs the configured sweep. `workers` overrides the configuration.
pub fn execute(cfg: &RunConfig, workers: Option<usize>) -> CliResult<SweepTable> {
    cfg.validate()?;
    let mut opts = cfg.run_options();
    if let Some(w) = workers {
        if w == 0 {
            return Err(CliError::Config("--workers must be positive".into()));
        }
        opts.workers = w;
    }
    Ok(run_sweep(&cfg.sweep, &opts)?)
}

/// Where a run came from, for the manifest.
pub struct Provenance<'a> {
    pub command: &'a str,
    pub preset: Option<&'a str>,
}

/// Runs `cfg` and writes its CSVs (plus `series.json` when `series` is set)
/// and `manifest.json` into `<root>/<name>`.
pub fn run_and_write(
    cfg: &RunConfig,
    out: Option<&Path>,
    workers: Option<usize>,
    series: bool,
    prov: Provenance<'_>,
) -> CliResult<PathBuf> {
    let start = Instant::now();
    let table = execute(cfg, workers)?;
    let wall = start.elapsed().as_secs_f64();
    let mut files = render_csvs(&table)?;
    if series {
        let s = series_json(&cfg.name, &table);
        files.push(("series.json".into(), pretty(&s)));
    }
    let opts = cfg.run_options();
    let manifest = json!({
        "tool": "coopmud",
        "version": env!("CARGO_PKG_VERSION"),
        "command": prov.command,
        "preset": prov.preset,
        "config": cfg,
        "config_toml": cfg.to_toml(),
        "seed": cfg.sweep.seed,
        "placement_seed": cfg.sweep.placement_seed,
        "batch_frames": opts.batch_frames,
        "workers": workers.unwrap_or(opts.workers),
        "files": files.iter().map(|(n, c)| json!({
            "name": n,
            "bytes": c.len(),
            "blob_sha256": crate::output::blob_hash(c),
        })).collect::<Vec<_>>(),
        "content_hash": content_hash(&files),
        "wall_time_seconds": wall,
    });
    files.push(("manifest.json".into(), pretty(&manifest)));
    commit_dir(&cfg.output_root(out), &cfg.name, &files)
}

fn pretty(v: &serde_json::Value) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(v).expect("json");
    s.push(b'\n');
    s
}

/// Figure preset lookup with an error listing the valid ids.
pub fn figure(id: &str) -> CliResult<RunConfig> {
    preset(id).ok_or_else(|| {
        CliError::Config(format!(
            "unknown figure `{id}`; valid ids: {}",
            PRESET_IDS.join(", ")
        ))
    })
}

pub fn cmd_reproduce(
    id: &str,
    overrides: &[String],
    out: Option<&Path>,
    workers: Option<usize>,
) -> CliResult<PathBuf> {
    let cfg = figure(id)?.with_overrides(overrides)?;
    run_and_write(
        &cfg,
        out,
        workers,
        true,
        Provenance {
            command: "reproduce",
            preset: Some(id),
        },
    )
}

pub fn cmd_sweep(
    config: Option<&Path>,
    preset_id: Option<&str>,
    overrides: &[String],
    out: Option<&Path>,
    workers: Option<usize>,
) -> CliResult<PathBuf> {
    let cfg = match (config, preset_id) {
        (Some(_), Some(_)) => {
            return Err(CliError::Config(
                "give either a config file or --preset, not both".into(),
            ))
        }
        (Some(path), None) => RunConfig::load(path, overrides)?,
        (None, Some(id)) => figure(id)?.with_overrides(overrides)?,
        (None, None) => {
            return Err(CliError::Config(
                "a config file or --preset is required".into(),
            ))
        }
    };
    run_and_write(
        &cfg,
        out,
        workers,
        false,
        Provenance {
            command: "sweep",
            preset: preset_id,
        },
    )
}

/// Rounds to twelve significant digits and prints the shortest form.
pub fn fmt_value(v: f64) -> String {
    let r: f64 = format!("{v:.11e}").parse().unwrap_or(v);
    format!("{r}")
}

fn list(v: &[f64]) -> String {
    format!(
        "[{}]",
        v.iter()
            .map(|x| fmt_value(*x))
            .collect::<Vec<_>>()
            .join(",")
    )
}

pub fn analyze_spectral(k: usize, n: usize) -> CliResult<String> {
    let v = spectral_efficiency(k, n)?;
    Ok(format!("# spectral k={k} n={n}\n{}\n", fmt_value(v)))
}

pub fn analyze_efficiency(a1: f64, a2: f64, ar: f64, rho: f64) -> CliResult<String> {
    let v = asymptotic_efficiency_two_user(a1, a2, ar, rho)?;
    Ok(format!(
        "# efficiency a1={} a2={} ar={} rho={}\n{}\n",
        fmt_value(a1),
        fmt_value(a2),
        fmt_value(ar),
        fmt_value(rho),
        fmt_value(v)
    ))
}

/// Prints `M*`; the CSV lists the average BER of every coded-set size.
pub fn analyze_mstar(
    p_sd: f64,
    p_sr: f64,
    p_rd: f64,
    k: usize,
    csv: Option<&Path>,
) -> CliResult<String> {
    let m = optimal_coding_set_size(p_sd, p_sr, p_rd, k)?;
    if let Some(path) = csv {
        let mut s = String::from("m,avg_ber\n");
        for size in 1..=k {
            let v = special_case_avg_ber(&SpecialCaseParams::new(p_sd, p_sr, p_rd, k, size)?);
            writeln!(s, "{size},{}", crate::output::fmt12(v)).unwrap();
        }
        std::fs::write(path, s)?;
    }
    Ok(format!(
        "# mstar psd={} psr={} prd={} k={k}\n{m}\n",
        fmt_value(p_sd),
        fmt_value(p_sr),
        fmt_value(p_rd)
    ))
}

pub fn analyze_large_system(
    betas: &[f64],
    noise: f64,
    powers: &[f64],
    weights: Option<&[f64]>,
    mode: MudMode,
    csv: Option<&Path>,
) -> CliResult<String> {
    if betas.is_empty() {
        return Err(CliError::Config("--beta needs at least one value".into()));
    }
    let weights = match weights {
        Some(w) => w.to_vec(),
        None => vec![1.0 / powers.len().max(1) as f64; powers.len()],
    };
    let pd = PowerDistribution::new(powers.to_vec(), weights.clone())?;
    let mode_name = match mode {
        MudMode::Individual => "individual",
        MudMode::Joint => "joint",
    };
    let mut out = format!(
        "# large-system noise={} power={} weights={} mode={mode_name}\n",
        fmt_value(noise),
        list(powers),
        list(&weights)
    );
    let mut rows = String::from("beta,decorrelator,mmse,optimal\n");
    for &beta in betas {
        let dec = large_system_decorrelator(beta)?;
        let mmse = large_system_mmse(beta, noise, &pd)?;
        let opt = large_system_optimal(beta, noise, &pd, mode)?.eta;
        writeln!(
            out,
            "beta={} decorrelator={} mmse={} optimal={}",
            fmt_value(beta),
            fmt_value(dec),
            fmt_value(mmse),
            fmt_value(opt)
        )
        .unwrap();
        writeln!(
            rows,
            "{},{},{},{}",
            crate::output::fmt12(beta),
            crate::output::fmt12(dec),
            crate::output::fmt12(mmse),
            crate::output::fmt12(opt)
        )
        .unwrap();
    }
    if let Some(path) = csv {
        std::fs::write(path, rows)?;
    }
    Ok(out)
}

/// Inputs of `analyze bounds`.
pub struct BoundsArgs<'a> {
    pub amplitudes: &'a [f64],
    pub relay: &'a [f64],
    pub sigma: f64,
    pub spreading_gain: usize,
    pub target: usize,
    pub detector: DetectorKind,
    pub rho: Option<f64>,
    pub draws: usize,
    pub seed: u64,
    pub p_direct: Option<f64>,
    pub p_source_relay: &'a [f64],
}

pub fn analyze_bounds(a: &BoundsArgs<'_>) -> CliResult<String> {
    let b2 = match a.detector {
        DetectorKind::Sic => {
            bound_perfect_source_relay(a.amplitudes, a.relay, a.sigma, a.spreading_gain, a.target)?
                [a.target]
        }
        DetectorKind::Optimal => match a.rho {
            Some(rho) => {
                if a.amplitudes.len() != 2 {
                    return Err(CliError::Run(
                        "domain error: --rho needs exactly two amplitudes".into(),
                    ));
                }
                bound_perfect_source_relay_optimal(
                    a.amplitudes,
                    a.relay,
                    &correlation_two_user(rho)?,
                    a.sigma,
                    a.target,
                )?
            }
            None => bound_perfect_source_relay_optimal_random(
                a.amplitudes,
                a.relay,
                a.sigma,
                a.spreading_gain,
                a.target,
                a.draws,
                a.seed,
            )?,
        },
        DetectorKind::MatchedFilter => {
            return Err(CliError::Config(
                "bounds are defined for the sic and optimal detectors".into(),
            ))
        }
    };
    let mut out = format!(
        "# bounds a={} relay={} sigma={} m={} target={} detector={}\n",
        list(a.amplitudes),
        list(a.relay),
        fmt_value(a.sigma),
        a.spreading_gain,
        a.target,
        a.detector
    );
    writeln!(out, "bound-2 {}", fmt_value(b2)).unwrap();
    if let Some(pd) = a.p_direct {
        let check = |p: f64| (0.0..=1.0).contains(&p);
        if !check(pd) || !a.p_source_relay.iter().all(|&p| check(p)) {
            return Err(CliError::Run(
                "domain error: link error probabilities must lie in [0, 1]".into(),
            ));
        }
        writeln!(
            out,
            "bound-1 {}",
            fmt_value(bound_mimo_mud(pd, a.p_source_relay))
        )
        .unwrap();
    }
    Ok(out)
}
