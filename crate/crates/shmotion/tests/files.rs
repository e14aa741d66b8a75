use std::fs;

use shmotion::config::ExperimentConfig;
use shmotion::experiment::{run_experiment, Setup};
use shmotion::formats::{load_steering, save_geometry, save_steering, save_trajectory};
use shmotion_core::motion::Trajectory;
use shmotion_core::steering::{near_uniform, RigidSphere, SteeringSet};
use shmotion_core::SPEED_OF_SOUND;

const BASE: &str = r#"
schema_version = 1
name = "files"
seed = 3
trials = 2

[array]
layout = "near_uniform"
count = 24
radius = 0.06

[motion]
mode = "rotate_z"
angular_velocity = 90.0

[source]
kind = "wideband"
directions_deg = [[70.0, -30.0]]

[noise]
snr = 15.0
band = "wideband"

[estimator]
method = "compensated"
order = 3
frames = 16
freq_range = [1800.0, 2700.0]
grid_resolution = 4.0
"#;

fn sphere() -> RigidSphere {
    RigidSphere {
        geometry: near_uniform(24, 0.06).unwrap(),
        speed_of_sound: SPEED_OF_SOUND,
    }
}

#[test]
fn exported_steering_reloads_within_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let set = SteeringSet::from_model(&sphere(), 4, 10_000.0, vec![500.0, 1234.5, 3000.0]).unwrap();
    let path = dir.path().join("steer.txt");
    save_steering(&path, &set).unwrap();
    let back = load_steering(&path).unwrap();
    assert_eq!(back.freqs, set.freqs);
    assert_eq!((back.mic_count, back.order), (24, 4));
    let worst = set
        .matrices
        .iter()
        .zip(&back.matrices)
        .map(|(a, b)| (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max))
        .fold(0.0, f64::max);
    assert!(worst <= 1e-12, "{worst}");
}

#[test]
fn tabulated_steering_reproduces_the_analytic_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_toml_str(BASE).unwrap();
    let setup = Setup::new(cfg.clone()).unwrap();
    let freqs: Vec<f64> = setup.bins.iter().map(|&b| setup.params.bin_frequency(b)).collect();
    let set = SteeringSet::from_model(&sphere(), 3, cfg.fs, freqs).unwrap();
    save_steering(&dir.path().join("steer.txt"), &set).unwrap();
    let text = BASE.replace("radius = 0.06", "radius = 0.06\nsteering_file = \"steer.txt\"");
    let path = dir.path().join("tab.toml");
    fs::write(&path, text).unwrap();
    let tab = ExperimentConfig::load(&path).unwrap();

    let a = run_experiment(&setup).unwrap();
    let b = run_experiment(&Setup::new(tab).unwrap()).unwrap();
    for (x, y) in a.conditions.iter().zip(&b.conditions) {
        for (s, t) in x.trials.iter().zip(&y.trials) {
            assert_eq!(s.estimates_deg, t.estimates_deg);
        }
    }
}

#[test]
fn steering_file_mismatch_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let set = SteeringSet::from_model(&sphere(), 2, 8000.0, vec![2000.0]).unwrap();
    save_steering(&dir.path().join("steer.txt"), &set).unwrap();
    let text = BASE.replace("radius = 0.06", "radius = 0.06\nsteering_file = \"steer.txt\"");
    let path = dir.path().join("tab.toml");
    fs::write(&path, text).unwrap();
    let err = Setup::new(ExperimentConfig::load(&path).unwrap()).unwrap_err();
    let msg = err.to_string();
    assert!(err.is_validation());
    assert!(msg.contains("array.steering_file") && msg.contains("fs") && msg.contains("order"), "{msg}");
}

#[test]
fn geometry_and_trajectory_files_drive_a_run() {
    let dir = tempfile::tempdir().unwrap();
    save_geometry(&dir.path().join("mics.csv"), &near_uniform(24, 0.06).unwrap()).unwrap();
    let cfg = ExperimentConfig::from_toml_str(BASE).unwrap();
    let params = cfg.stft_params().unwrap();
    let times: Vec<f64> = (0..16).map(|i| params.frame_center_time(i) - params.frame_center_time(0)).collect();
    let traj = Trajectory::rotate_z(90f64.to_radians(), &times).unwrap();
    save_trajectory(&dir.path().join("path.csv"), &traj).unwrap();

    let text = BASE
        .replace("layout = \"near_uniform\"\ncount = 24\nradius = 0.06", "layout = \"file\"\ngeometry_file = \"mics.csv\"")
        .replace("mode = \"rotate_z\"\nangular_velocity = 90.0", "mode = \"trajectory_file\"\ntrajectory_file = \"path.csv\"");
    let path = dir.path().join("files.toml");
    fs::write(&path, text).unwrap();
    let setup = Setup::new(ExperimentConfig::load(&path).unwrap()).unwrap();
    let run = run_experiment(&setup).unwrap();
    assert_eq!(run.conditions.len(), 1);
    let c = &run.conditions[0];
    assert_eq!(c.completed, 2);
    assert!(c.mean_error_deg.unwrap() < 10.0, "{:?}", c.mean_error_deg);

    let short = fs::read_to_string(dir.path().join("files.toml")).unwrap().replace("frames = 16", "frames = 30");
    fs::write(&path, short).unwrap();
    let err = Setup::new(ExperimentConfig::load(&path).unwrap()).unwrap_err();
    assert!(err.to_string().contains("motion.trajectory_file"), "{err}");
}
