use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lumafield(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lumafield"))
        .args(args)
        .current_dir(dir)
        .env("LUMAFIELD_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

const TINY_SPEC: &str = r#"
mesh_stacks = 16
mesh_slices = 32
env_rows = 16
env_cols = 32

[views]
count = 2
width = 12
height = 12
"#;

const TINY_NET: &[&str] = &[
    "--network.hidden_width", "8",
    "--network.depth", "2",
    "--network.inject_layer", "1",
    "--pos_frequencies", "2",
    "--dir_frequencies", "1",
    "--samples_per_ray", "8",
];

#[test]
fn render_with_fixed_material_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = lumafield(
        dir.path(),
        &["render", "--fixed-material", "0.3,0.5", "--width", "24", "--height", "20", "--layers", "-o", "img/out.png"],
    );
    let stdout = ok(&out);
    assert!(stdout.contains("24x20 480"));
    for f in ["out.png", "out.hdr", "out_timing.txt", "out_specular.png", "out_diffuse.png", "out_sss.hdr", "out_background.hdr"] {
        assert!(dir.path().join("img").join(f).exists(), "{f} missing");
    }
    let timing = fs::read_to_string(dir.path().join("img/out_timing.txt")).unwrap();
    assert!(timing.lines().nth(1).unwrap().starts_with("24x20 480 "));
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(lumafield(dir.path(), &["render"]).status.code(), Some(2));
    assert_eq!(lumafield(dir.path(), &["render", "--fixed-material", "1", "--render.bogus", "1"]).status.code(), Some(2));
    assert_eq!(lumafield(dir.path(), &["render", "--fixed-material", "0,0", "--density.delta", "-1"]).status.code(), Some(2));
    let bad = Command::new(env!("CARGO_BIN_EXE_lumafield"))
        .args(["render", "--fixed-material", "0,0"])
        .env("LUMAFIELD_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn missing_assets_exit_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = lumafield(dir.path(), &["render", "--fixed-material", "0,0", "--paths.mesh", "nope.obj"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.obj"));
    let out = lumafield(dir.path(), &["render", "--paths.checkpoint", "missing.lfck"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn olat_relight_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    ok(&lumafield(dir.path(), &["gen-olat", "--center", "0,1,0", "--radius", "15", "--rows", "32", "--cols", "64", "-o", "olat.hdr"]));
    ok(&lumafield(
        dir.path(),
        &["relight", "olat.hdr", "--fixed-material", "0.2,0.1", "--width", "16", "--height", "16", "-o", "lit.png"],
    ));
    let stdout = ok(&lumafield(dir.path(), &["metrics", "lit.hdr", "lit.hdr"]));
    assert!(stdout.contains("psnr inf"), "{stdout}");
    assert!(stdout.contains("ssim 1.000000"), "{stdout}");
    let stdout = ok(&lumafield(dir.path(), &["metrics", "lit.png", "lit.hdr"]));
    let psnr: f64 = stdout.lines().next().unwrap().trim_start_matches("psnr ").parse().unwrap();
    assert!(psnr > 30.0, "{stdout}");
}

#[test]
fn dataset_train_render_probe_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("spec.toml"), TINY_SPEC).unwrap();
    let manifest = ok(&lumafield(dir.path(), &["gen-dataset", "--spec", "spec.toml", "-o", "ds"]));
    assert!(manifest.trim().ends_with("manifest.toml"));

    let mut args = vec![
        "train", "--paths.dataset", "ds/manifest.toml", "--iterations", "4", "--batch_rays", "16", "--checkpoint_every", "2",
        "-o", "run",
    ];
    args.extend_from_slice(TINY_NET);
    let stdout = ok(&lumafield(dir.path(), &args));
    assert!(stdout.starts_with("psnr "));
    let run = dir.path().join("run");
    for f in ["loss.csv", "final.lfck", "metrics.txt", "ckpt_000002.lfck", "ckpt_000004.lfck"] {
        assert!(run.join(f).exists(), "{f} missing");
    }
    let csv = fs::read_to_string(run.join("loss.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);

    let mut resume = vec![
        "train", "--resume", "--paths.dataset", "ds/manifest.toml", "--paths.checkpoint", "run/ckpt_000002.lfck",
        "--iterations", "4", "--batch_rays", "16", "--checkpoint_every", "0", "-o", "resumed",
    ];
    resume.extend_from_slice(TINY_NET);
    ok(&lumafield(dir.path(), &resume));
    assert_eq!(fs::read(run.join("final.lfck")).unwrap(), fs::read(dir.path().join("resumed/final.lfck")).unwrap());

    let mut render = vec!["render", "--paths.checkpoint", "run/final.lfck", "--width", "12", "--height", "12", "-o", "r.png"];
    render.extend_from_slice(TINY_NET);
    ok(&lumafield(dir.path(), &render));
    assert!(dir.path().join("r.hdr").exists());

    let probe = ["probe-field", "--paths.checkpoint", "run/final.lfck", "--grid", "2,2,1", "--tile", "8", "-o", "probes"];
    assert!(ok(&lumafield(dir.path(), &probe)).contains("4 tiles"));
    assert!(dir.path().join("probes.png").exists());
}

#[test]
fn diverging_training_exits_with_code_four() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("spec.toml"), TINY_SPEC).unwrap();
    ok(&lumafield(dir.path(), &["gen-dataset", "--spec", "spec.toml", "-o", "ds"]));
    let mut args =
        vec!["train", "--paths.dataset", "ds/manifest.toml", "--iterations", "50", "--batch_rays", "16", "--lr", "1e30", "-o", "run"];
    args.extend_from_slice(TINY_NET);
    let out = lumafield(dir.path(), &args);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("run/loss.csv").exists());
}

#[test]
fn ablations_and_bench_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let small = ["--width", "16", "--height", "16"];
    let mut args = vec!["ablate", "material-layers", "--fixed-material", "0.3,0.4", "-o", "layers"];
    args.extend_from_slice(&small);
    let stdout = ok(&lumafield(dir.path(), &args));
    let err: f64 = stdout.lines().nth(1).unwrap().parse().unwrap();
    assert!(err <= 1e-5);

    let mut args = vec!["ablate", "density", "-o", "density"];
    args.extend_from_slice(&small);
    let stdout = ok(&lumafield(dir.path(), &args));
    assert_eq!(stdout.lines().count(), 7);
    assert!(dir.path().join("density/density_grid.png").exists());

    let mut args = vec!["ablate", "sampling", "-o", "sampling"];
    args.extend_from_slice(&small);
    let stdout = ok(&lumafield(dir.path(), &args));
    assert!(stdout.contains("importance,") && stdout.contains("uniform,"));

    let stdout = ok(&lumafield(dir.path(), &["bench", "--resolutions", "8,16", "--repeats", "1", "-o", "bench.csv"]));
    assert!(stdout.starts_with("res,seconds\n8,"));
    assert!(dir.path().join("bench.csv").exists());
}

#[test]
fn olat_render_matches_analytic_sphere() {
    use lumafield::assets::{RadianceMap, TextureMap};
    use lumafield::lighting::LightSampling;
    use lumafield::training::{psnr, reference_image, AnalyticSphere};
    use lumafield::transport::Camera;
    use lumafield::{Rgb, Vec3};

    let dir = tempfile::tempdir().unwrap();
    ok(&lumafield(dir.path(), &["gen-olat", "--center", "-0.4,1,0.3", "--radius", "10", "--radiance", "8", "-o", "olat.hdr"]));
    ok(&lumafield(
        dir.path(),
        &["render", "--fixed-material", "0,0", "--paths.hdri", "olat.hdr", "--width", "64", "--height", "64", "-o", "s.png"],
    ));
    let map = RadianceMap::load(dir.path().join("olat.hdr")).unwrap();
    let lights = LightSampling::default().sample(&map).unwrap();
    let camera = Camera::looking_at(Vec3::new(0.0, 0.0, 4.0), Vec3::zero(), 36.0, 64, 64).unwrap();
    let sphere = AnalyticSphere { center: Vec3::zero(), radius: 1.0 };
    let oracle = reference_image(&sphere, &TextureMap::constant(Rgb::splat(0.8)), &lights, &map, &camera, 0.0, 32.0);
    let rendered = RadianceMap::load(dir.path().join("s.hdr")).unwrap().image;
    let db = psnr(&rendered, &oracle).unwrap();
    assert!(db >= 40.0, "psnr {db}");
}

#[test]
fn uniform_sampling_hardens_small_source_shadows() {
    let dir = tempfile::tempdir().unwrap();
    ok(&lumafield(dir.path(), &["gen-olat", "--center", "-0.4,1,0.3", "--radius", "5", "--radiance", "40", "-o", "olat.hdr"]));
    let stdout = ok(&lumafield(
        dir.path(),
        &[
            "ablate", "sampling", "--paths.hdri", "olat.hdr", "--paths.mesh", "builtin:sphere-on-plane", "--camera_position",
            "0,4,5", "--look_at", "0,-1,0", "--width", "128", "--height", "128", "--fixed-material", "0,0", "--exposure",
            "0.3", "-o", "samp",
        ],
    ));
    let gradient = |mode: &str| -> f64 {
        let line = stdout.lines().find(|l| l.starts_with(mode)).unwrap();
        line.split(',').nth(2).unwrap().parse().unwrap()
    };
    assert!(gradient("uniform") > gradient("importance"), "{stdout}");
}

#[test]
fn zero_checkpoint_probes_are_black() {
    use lumafield::neural::{save_checkpoint, NetworkConfig, Networks, SceneBox};
    let dir = tempfile::tempdir().unwrap();
    let config = NetworkConfig { hidden_width: 8, depth: 2, inject_layer: 1, ..Default::default() };
    let nets = Networks::<f32>::zeros(config, SceneBox::unit()).unwrap();
    save_checkpoint(dir.path().join("zero.lfck"), &nets, None).unwrap();
    let stdout = ok(&lumafield(dir.path(), &["probe-field", "--paths.checkpoint", "zero.lfck", "--tile", "8", "-o", "p.png"]));
    assert!(stdout.contains("16 tiles"));
    let img = lumafield::assets::RadianceMap::load(dir.path().join("p.hdr")).unwrap().image;
    assert_eq!((img.width, img.height), (32, 32));
    assert!(img.data.iter().all(|p| p.r == 0.0 && p.g == 0.0 && p.b == 0.0));
}

#[test]
fn olat_map_is_lit_only_near_the_top() {
    let dir = tempfile::tempdir().unwrap();
    ok(&lumafield(dir.path(), &["gen-olat", "--center", "0,1,0", "--radius", "10", "-o", "top.hdr"]));
    let map = lumafield::assets::RadianceMap::load(dir.path().join("top.hdr")).unwrap();
    assert_eq!((map.rows(), map.cols()), (100, 150));
    for r in 0..map.rows() {
        let lit = (0..map.cols()).any(|c| map.pixel(r, c).r > 0.0);
        assert_eq!(lit, r < 6, "row {r}");
    }
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let args = ["render", "--fixed-material", "0.3,0.4", "--width", "20", "--height", "20", "-o", name];
        ok(&lumafield(dir.path(), &args));
        let dens = ["ablate", "density", "--width", "12", "--height", "12", "-o", &format!("{name}_abl")];
        ok(&lumafield(dir.path(), &dens));
        (
            fs::read(dir.path().join(format!("{name}.png"))).unwrap(),
            fs::read(dir.path().join(format!("{name}_abl/density.csv"))).unwrap(),
            fs::read(dir.path().join(format!("{name}_abl/density_grid.png"))).unwrap(),
        )
    };
    assert_eq!(run("a"), run("b"));
}
