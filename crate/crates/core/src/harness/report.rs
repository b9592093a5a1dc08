//! CSV and SVG outputs: trajectory overlays, reward curves, spectrogram
//! heatmaps and waveforms. All number formatting is fixed-precision, so
//! the same inputs always give the same bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::acoustics::BinauralRIR;
use crate::error::{Error, Result};
use crate::scene::{build_scene, NavScene};
use crate::spectral::Stft;

use super::config::RunConfig;
use super::env::{ground_truth, EnvContext, Episode};
use super::trace::EpisodeTrace;
use super::train::TrainedModels;

const PX_PER_M: f64 = 40.0;
const MARGIN: f64 = 20.0;
const AGENT_COLORS: [&str; 2] = ["#d62728", "#1f77b4"];

#[derive(Debug, Clone, Default)]
pub struct ReportOutcome {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

pub fn trace_stem(t: &EpisodeTrace) -> String {
    format!("{}_seed{}_scene{}_ep{}", t.meta.model, t.meta.seed, t.meta.scene_index, t.meta.episode)
}

/// Top-down view: one circle per node (visited nodes shaded), interior
/// walls, and both agents' paths.
pub fn trajectory_svg(scene: &NavScene, trace: &EpisodeTrace) -> String {
    let spec = &scene.spec;
    let w = spec.width * PX_PER_M + 2.0 * MARGIN;
    let h = spec.depth * PX_PER_M + 2.0 * MARGIN;
    // y grows upward in the scene, downward in SVG
    let px = |p: [f64; 2]| (MARGIN + p[0] * PX_PER_M, h - MARGIN - p[1] * PX_PER_M);
    let mut visited = vec![false; scene.node_count()];
    for n in trace.visited_nodes() {
        visited[n] = true;
    }
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.1}" height="{h:.1}" viewBox="0 0 {w:.1} {h:.1}">"#);
    let _ = writeln!(
        s,
        r##"<rect x="{MARGIN:.1}" y="{MARGIN:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#333" stroke-width="2"/>"##,
        spec.width * PX_PER_M,
        spec.depth * PX_PER_M
    );
    for wall in &spec.walls {
        let (x1, y1) = px(wall.a);
        let (x2, y2) = px(wall.b);
        let _ = writeln!(s, r##"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="#333" stroke-width="3"/>"##);
    }
    for n in 0..scene.node_count() {
        let (x, y) = px(scene.ground(n));
        let fill = if visited[n] { "#9ecae1" } else { "#ffffff" };
        let _ = writeln!(s, r##"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="{fill}" stroke="#888" stroke-width="0.5"/>"##);
    }
    for (j, color) in AGENT_COLORS.iter().enumerate() {
        let pts: Vec<String> = trace
            .steps
            .iter()
            .map(|st| {
                let (x, y) = px(scene.ground(st.poses[j].node));
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2" stroke-opacity="0.8"/>"#, pts.join(" "));
        if let Some(first) = trace.steps.first() {
            let (x, y) = px(scene.ground(first.poses[j].node));
            let _ = writeln!(s, r#"<rect x="{:.2}" y="{:.2}" width="8" height="8" fill="{color}"/>"#, x - 4.0, y - 4.0);
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Per-step reward components with the running total.
pub fn reward_csv(trace: &EpisodeTrace) -> String {
    let mut s = String::from("t,r_xi,r_zeta,r_psi,r_phi,total,cumulative,r_omega,r_nu,pe,zeta,psi,phi\n");
    let mut cum = 0.0;
    for st in &trace.steps {
        let r = &st.reward;
        cum += r.total;
        let _ = writeln!(
            s,
            "{},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9}",
            st.t, r.r_xi, r.r_zeta, r.r_psi, r.r_phi, r.total, cum, st.shares.0, st.shares.1, st.pe, st.zeta, st.psi, st.phi
        );
    }
    s
}

/// Line chart of the cumulative reward of each trace.
pub fn reward_svg(traces: &[&EpisodeTrace]) -> String {
    let (w, h) = (640.0, 360.0);
    let curves: Vec<Vec<f64>> = traces
        .iter()
        .map(|t| {
            t.steps
                .iter()
                .scan(0.0, |c, st| {
                    *c += st.reward.total;
                    Some(*c)
                })
                .collect()
        })
        .collect();
    let t_max = curves.iter().map(|c| c.len()).max().unwrap_or(1).saturating_sub(1).max(1) as f64;
    let lo = curves.iter().flatten().cloned().fold(0.0f64, f64::min);
    let hi = curves.iter().flatten().cloned().fold(0.0f64, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let x = |t: usize| MARGIN * 2.0 + t as f64 / t_max * (w - 3.0 * MARGIN);
    let y = |v: f64| h - MARGIN * 2.0 - (v - lo) / span * (h - 3.0 * MARGIN);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"#);
    let _ = writeln!(
        s,
        r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#999"/>"##,
        x(0),
        y(0.0),
        x(t_max as usize),
        y(0.0)
    );
    for (i, c) in curves.iter().enumerate() {
        let pts: Vec<String> = c.iter().enumerate().map(|(t, v)| format!("{:.2},{:.2}", x(t), y(*v))).collect();
        let hue = (i * 137) % 360;
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="hsl({hue},60%,45%)" stroke-width="1.5"/>"#, pts.join(" "));
    }
    let _ = writeln!(s, r#"<text x="{:.0}" y="{:.0}" font-size="12">cumulative reward ({:.4} .. {:.4})</text>"#, MARGIN * 2.0, MARGIN, lo, hi);
    s.push_str("</svg>\n");
    s
}

/// Magnitude spectrogram rows: `source,channel,frame,bin_0..bin_{K-1}`.
pub fn spectrogram_csv(stft: &Stft, rirs: &[(&str, &BinauralRIR)]) -> Result<String> {
    let bins = stft.config().bins();
    let mut s = String::from("source,channel,frame");
    for k in 0..bins {
        let _ = write!(s, ",bin{k}");
    }
    s.push('\n');
    for (name, rir) in rirs {
        for c in 0..2 {
            let spec = stft.magnitude(&rir.channel_f64(c))?;
            for f in 0..spec.frames {
                let _ = write!(s, "{name},{c},{f}");
                for v in spec.frame(f) {
                    let _ = write!(s, ",{v:.6e}");
                }
                s.push('\n');
            }
        }
    }
    Ok(s)
}

/// Samples of each response: `sample,{name}_left,{name}_right,...`.
pub fn waveform_csv(rirs: &[(&str, &BinauralRIR)]) -> String {
    let mut s = String::from("sample");
    for (name, _) in rirs {
        let _ = write!(s, ",{name}_left,{name}_right");
    }
    s.push('\n');
    let len = rirs.iter().map(|(_, r)| r.len()).min().unwrap_or(0);
    for i in 0..len {
        let _ = write!(s, "{i}");
        for (_, r) in rirs {
            let _ = write!(s, ",{:.7e},{:.7e}", r.channel(0)[i], r.channel(1)[i]);
        }
        s.push('\n');
    }
    s
}

/// Forward-direction truth and (with a model) prediction at the last step
/// of `trace`, reproduced by replaying its actions.
pub fn final_responses(cfg: &RunConfig, scene: &NavScene, trace: &EpisodeTrace, models: Option<&TrainedModels>) -> Result<Vec<(String, BinauralRIR)>> {
    let last = trace.steps.last().ok_or_else(|| Error::Format("empty trace".into()))?;
    let truth = ground_truth(scene, last.poses[0].node, last.poses[1], cfg.rir_length)?;
    let mut out = vec![("truth".to_string(), truth)];
    if let Some(m) = models {
        let stft = Stft::new(cfg.stft)?;
        let ctx = EnvContext { cfg, stft: &stft };
        let source = m.predict_source();
        let (mut ep, mut meas) = Episode::start(ctx, scene, trace.meta.scene_index, trace.steps[0].poses, source, trace.meta.coefs)?;
        for st in &trace.steps[1..] {
            let actions = st.actions.ok_or_else(|| Error::Format(format!("step {} has no actions", st.t)))?;
            meas = ep.step(ctx, actions, source)?.measurement;
        }
        if ep.poses() != last.poses {
            return Err(Error::Format("trace replay diverged from the logged poses".into()));
        }
        out.push(("pred".to_string(), BinauralRIR::from_f64(cfg.sample_rate, &meas.forward_pred)?));
    }
    Ok(out)
}

fn write(out: &mut ReportOutcome, path: PathBuf, body: &str) -> Result<()> {
    std::fs::write(&path, body).map_err(|e| Error::file(&path, e))?;
    out.files.push(path);
    Ok(())
}

/// Writes every per-episode file plus a combined reward chart. An empty
/// trace list writes nothing and returns a warning.
pub fn write_report(dir: &Path, cfg: &RunConfig, traces: &[EpisodeTrace], models: Option<&TrainedModels>) -> Result<ReportOutcome> {
    let mut out = ReportOutcome::default();
    if traces.is_empty() {
        out.warnings.push("no traces given; nothing written".into());
        return Ok(out);
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    let stft = Stft::new(cfg.stft)?;
    for t in traces {
        let scene = build_scene(&t.meta.scene)?;
        let stem = trace_stem(t);
        write(&mut out, dir.join(format!("trajectory_{stem}.svg")), &trajectory_svg(&scene, t))?;
        write(&mut out, dir.join(format!("rewards_{stem}.csv")), &reward_csv(t))?;
        let rirs = final_responses(cfg, &scene, t, models)?;
        let named: Vec<(&str, &BinauralRIR)> = rirs.iter().map(|(n, r)| (n.as_str(), r)).collect();
        write(&mut out, dir.join(format!("spectrogram_{stem}.csv")), &spectrogram_csv(&stft, &named)?)?;
        write(&mut out, dir.join(format!("waveform_{stem}.csv")), &waveform_csv(&named))?;
    }
    let refs: Vec<&EpisodeTrace> = traces.iter().collect();
    write(&mut out, dir.join("reward_curves.svg"), &reward_svg(&refs))?;
    Ok(out)
}
