//! Derived radar quantities for the default 24 GHz array, and where single
//! point scatterers land on the range/Doppler/angle grids.

use fmcw_track::dsp::{DspConfig, Preprocessor};
use fmcw_track::scene::Scatterer;
use fmcw_track::synth::{add_scatterers, FrameCube};
use fmcw_track::RadarParams;

fn main() -> fmcw_track::Result<()> {
    let p = RadarParams::default();
    let res = p.resolutions()?;
    println!("wavelength          {:.4} mm", p.wavelength() * 1e3);
    println!("range resolution    {:.3} m", res.range_res_m);
    println!("range bin spacing   {:.3} m", p.range_bin_spacing());
    println!("velocity resolution {:.3} m/s", res.velocity_res_mps);
    println!("max |velocity|      {:.2} m/s", p.max_unambiguous_velocity());
    println!("angle resolution    {:.2} deg", res.angle_res_rad_boresight.to_degrees());
    println!("beat at 5 m         {:.0} Hz", p.beat_frequency(5.0));

    let pre = Preprocessor::new(&p, &DspConfig { mti: false, ..DspConfig::default() })?;
    for (range_m, az_deg, v) in [(5.0, 0.0f64, 0.0), (5.0, 0.0, 1.0), (4.0, 20.0, 0.0)] {
        let mut frame = FrameCube::zeros(p.chirps_per_frame, p.n_virtual_channels, p.adc_samples);
        let s = Scatterer {
            range_m,
            azimuth_rad: az_deg.to_radians(),
            radial_velocity_mps: v,
            amplitude: 1.0,
        };
        add_scatterers(&mut frame, &p, &[s]);
        let rd = pre.range_doppler(&frame);
        let (r_bin, d_bin) = pre.make_rd_map(&rd, p.n_virtual_channels, 0)?.argmax();
        let ra = pre.make_ra_map(&rd, p.n_virtual_channels, 0)?;
        let (_, a_bin) = ra.argmax();
        println!(
            "r={range_m} m, az={az_deg} deg, v={v} m/s: range bin {r_bin}, Doppler bin {:+}, angle {:.1} deg",
            d_bin as isize - pre.zero_doppler_bin() as isize,
            ra.cross_axis[a_bin].to_degrees()
        );
    }
    Ok(())
}
