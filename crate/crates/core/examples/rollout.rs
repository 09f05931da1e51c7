//! Fit, save, reload, then integrate the recovered model and compare trajectories.

use unrolled_sindy::discover::discover;
use unrolled_sindy::io::{load_dataset, load_model, save_dataset, save_model};
use unrolled_sindy::simulate::{mean_absolute_error, rollout, simulate, stride_for, subsample};
use unrolled_sindy::{DiscoveryConfig, System, SystemSpec};

fn main() -> unrolled_sindy::Result<()> {
    let spec = SystemSpec::default_for(System::CubicOscillator);
    let fine = simulate(&spec)?;
    let data = subsample(&fine, stride_for(0.1, spec.fine_dt)?)?;
    let dir = std::env::temp_dir();
    let (dpath, mpath) = (dir.join("cubic.dataset"), dir.join("cubic-model.json"));
    save_dataset(&data, &dpath)?;
    let data = load_dataset(&dpath)?;
    let lib = spec.library()?;
    let reference = subsample(&fine, stride_for(0.01, spec.fine_dt)?)?;
    let x0 = data.states().index_axis(ndarray::Axis(0), 0).to_owned();
    for k in [1, 20] {
        let model = discover(&data, &lib, &DiscoveryConfig::for_system(spec.system).with_k(k))?;
        save_model(&model, &mpath)?;
        let model = load_model(&mpath)?;
        match rollout(&model, x0.view(), data.grid(), spec.t_end, 0.01) {
            Ok(traj) => println!("K={k}: trajectory MAE {:.4}", mean_absolute_error(&traj, &reference)?),
            Err(e) => println!("K={k}: rollout failed: {e}"),
        }
    }
    println!("dataset fingerprint {}", data.fingerprint());
    Ok(())
}
