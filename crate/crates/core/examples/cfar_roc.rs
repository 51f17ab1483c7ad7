//! Empirical ROC of CA and OS CFAR on the multipath scene, RA against RD.

use fmcw_track::cfar::CfarKind;
use fmcw_track::eval::{labeled_maps, log_grid, roc_auc, roc_from_maps, RocOptions};
use fmcw_track::pipeline::PipelineKind;
use fmcw_track::scenarios::scenario;
use fmcw_track::RadarParams;

fn main() -> fmcw_track::Result<()> {
    let params = RadarParams::default();
    let scene = scenario("1T_AB_multipath", 100)?;
    let opts = RocOptions::default();
    let pfa = log_grid(1e-6, 0.5, 16);
    for kind in [PipelineKind::Ra, PipelineKind::Rd] {
        let lm = labeled_maps(&scene, &params, kind, &opts)?;
        for cfar in [CfarKind::Ca, CfarKind::Os] {
            let curve = roc_from_maps(&lm, cfar, &[(8, 2)], &pfa, opts.os_rank_fraction)?;
            println!("{kind} {} AUC {:.4}", cfar.name(), roc_auc(&curve)?);
            for p in curve.iter().step_by(3) {
                println!("  design {:.1e}  P_FA {:.2e}  P_D {:.3}", p.design_pfa, p.emp_pfa, p.emp_pd);
            }
        }
    }
    Ok(())
}
