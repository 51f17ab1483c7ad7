//! Two people 0.6 m apart walking away from the radar, tracked with fewer
//! and fewer array channels. Shows where the two tracks start to merge.

use fmcw_track::eval::{channel_ablation_on_cube, ABLATION_SUBSETS};
use fmcw_track::pipeline::{PipelineConfig, PipelineKind};
use fmcw_track::scenarios::scenario;
use fmcw_track::synth::synthesize_cube;
use fmcw_track::RadarParams;

fn main() -> fmcw_track::Result<()> {
    let params = RadarParams::default();
    let scene = scenario("2T_parallel_0p6m", 1)?;
    let cube = synthesize_cube(&scene, &params)?;
    let truth = scene.ground_truth(&params);
    let cfg = PipelineConfig::new(PipelineKind::Ra, &params).peak_grouped();
    println!("channels  rmse  switches  merge onset  both matched below 5 m");
    for row in channel_ablation_on_cube(&cube, &truth, &cfg, &ABLATION_SUBSETS)? {
        let m = &row.metrics;
        let near = m.fraction_where(|f| f.truth_ranges.len() == 2 && f.truth_ranges[0] < 5.0, |f| f.matches.iter().all(Option::is_some));
        let onset = m.merge_onset_m.map_or("-".to_string(), |r| format!("{r:.2} m"));
        println!("{:8} {:5.3} {:9} {:>12} {:24.3}", row.channels, m.rmse_m, m.id_switches, onset, near);
    }
    Ok(())
}
