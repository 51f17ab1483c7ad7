//! Synthesizes a built-in scene and prints its ground truth and cube size.
//!
//! `cargo run --release --example synthesize_scene -- 2T_tangential_4m 7`

use fmcw_track::scenarios::scenario;
use fmcw_track::synth::synthesize_cube;
use fmcw_track::RadarParams;

fn main() -> fmcw_track::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "1T_AB".into());
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let params = RadarParams::default();
    let scene = scenario(&name, seed)?;
    let cube = synthesize_cube(&scene, &params)?;
    let (frames, chirps, channels, samples) = cube.shape();
    println!("{name}: {frames} frames x {chirps} chirps x {channels} channels x {samples} samples");
    println!("mean sample power in frame 0: {:.3}", cube.frames[0].mean_power());

    let truth = scene.ground_truth(&params);
    println!("frame  target      x      y  range  v_r");
    for rows in truth.iter().step_by(10) {
        for t in rows {
            println!("{:5} {:7} {:6.2} {:6.2} {:6.2} {:+5.2}", t.frame, t.target_id, t.x, t.y, t.range(), t.radial_velocity);
        }
    }
    Ok(())
}
