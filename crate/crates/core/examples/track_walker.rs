//! Runs both tracking chains on one walker and prints the confirmed tracks
//! every second next to the truth.

use fmcw_track::eval::track_metrics;
use fmcw_track::pipeline::{run_pipeline, PipelineConfig, PipelineKind};
use fmcw_track::scenarios::scenario;
use fmcw_track::synth::synthesize_cube;
use fmcw_track::RadarParams;

fn main() -> fmcw_track::Result<()> {
    let params = RadarParams::default();
    let scene = scenario("1T_AB", 1)?;
    let cube = synthesize_cube(&scene, &params)?;
    let truth = scene.ground_truth(&params);
    for kind in [PipelineKind::Ra, PipelineKind::Rd] {
        let result = run_pipeline(&cube, &PipelineConfig::new(kind, &params))?;
        let m = track_metrics(&result, &truth);
        println!("{kind}: RMSE {:.3} m, {} id switches, miss rate {:.3}", m.rmse_m, m.id_switches, m.miss_rate);
        for f in result.frames.iter().step_by(10) {
            let t = &truth[f.frame_index][0];
            let tracks: Vec<String> = f.confirmed().map(|s| format!("#{} ({:.2}, {:.2})", s.id, s.x, s.y)).collect();
            println!("  t={:4.1}s truth ({:.2}, {:.2})  {}", f.time_s, t.x, t.y, tracks.join(" "));
        }
        let mean_ms = result.runtimes.iter().map(|r| r.total_ms()).sum::<f64>() / result.runtimes.len() as f64;
        println!("  mean frame time {mean_ms:.1} ms");
    }
    Ok(())
}
