//! Subcommand implementations.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use lumafield::assets::{ColorSpace, RadianceMap, TextureMap};
use lumafield::image::{laplacian_variance, RgbImage};
use lumafield::lighting::{generate_olat, LightSampling, OlatSpec};
use lumafield::neural::{load_checkpoint, SceneBox};
use lumafield::shfield::{project_to_sh, ShCoeffs12};
use lumafield::training::{
    format_psnr, generate_reference_dataset, psnr, ssim, Dataset, SphereSceneSpec, TrainConfig, Trainer, TrainingScene,
};
use lumafield::transport::{
    render_image, Camera, Environment, PatternFields, RenderOutput, RenderSettings, ShadingFields,
};
use lumafield::{Rgb, Vec3};

use crate::config::RunConfig;
use crate::fail::Failure;
use crate::scene::{self, Fields};
use crate::AblateMode;

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::asset(format!("{}: {e}", path.display())))
}

fn create_dir(path: &Path) -> Result<(), Failure> {
    fs::create_dir_all(path).map_err(|e| Failure::asset(format!("{}: {e}", path.display())))
}

/// `out.png` → `out`; other paths unchanged.
fn stem(path: PathBuf) -> PathBuf {
    match path.extension().and_then(|e| e.to_str()) {
        Some("png" | "hdr") => path.with_extension(""),
        _ => path,
    }
}

fn with_suffix(stem: &Path, suffix: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn save_image(img: &RgbImage, stem: &Path, exposure: f64) -> Result<(), Failure> {
    if let Some(parent) = stem.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    img.save_png(with_suffix(stem, ".png"), exposure)?;
    RadianceMap::new(img.clone()).save(with_suffix(stem, ".hdr"))?;
    Ok(())
}

/// Environment whose light code matches what the fields were trained with.
fn env_for(cfg: &RunConfig, fields: &Fields, map: RadianceMap) -> Result<Environment, Failure> {
    let (source, dim) = match fields {
        Fields::Networks(n) => (n.config.light_code_source, n.config.light_code_dim),
        Fields::Fixed(_) => (cfg.network.light_code_source, cfg.network.light_code_dim),
    };
    Ok(Environment::new(map, &cfg.sampling, source, dim)?)
}

pub fn render(cfg: &RunConfig, fixed: Option<&str>, layers: bool, hdri: Option<&Path>) -> Result<(), Failure> {
    let asset = scene::load_asset(cfg)?;
    let fields = scene::load_fields(cfg, fixed, &asset)?;
    let map = scene::load_map(hdri.or(cfg.paths.hdri.as_deref()))?;
    let env = env_for(cfg, &fields, map)?;
    let camera = scene::camera(cfg, cfg.render.width, cfg.render.height)?;
    let out = render_image(&asset, &camera, &fields, &env, &cfg.render_settings())?;
    let stem = stem(cfg.output_or("render"));
    save_image(&out.image, &stem, cfg.render.exposure)?;
    if layers {
        write_layers(&out, &stem, cfg.render.exposure)?;
    }
    let line = out.timing.to_line();
    write_text(&with_suffix(&stem, "_timing.txt"), &format!("{}\n{line}\n", lumafield::transport::RenderTiming::HEADER))?;
    println!("{line}");
    Ok(())
}

fn write_layers(out: &RenderOutput, stem: &Path, exposure: f64) -> Result<(), Failure> {
    let l = &out.layers;
    for (name, img) in [("specular", &l.specular), ("diffuse", &l.diffuse), ("sss", &l.sss), ("background", &l.background)] {
        save_image(img, &with_suffix(stem, &format!("_{name}")), exposure)?;
    }
    Ok(())
}

pub fn train(cfg: &RunConfig, resume: bool) -> Result<(), Failure> {
    let manifest = cfg
        .paths
        .dataset
        .as_ref()
        .ok_or_else(|| Failure::config("train needs a dataset manifest (--paths.dataset)"))?;
    let dataset = Dataset::load(manifest)?;
    let out_dir = cfg.output_or("train_out");
    create_dir(&out_dir)?;
    let (network, checkpoint) = if resume {
        let path = cfg
            .paths
            .checkpoint
            .as_ref()
            .ok_or_else(|| Failure::config("--resume needs --paths.checkpoint"))?;
        let ck = load_checkpoint(path)?;
        (ck.networks.config.clone(), Some(ck))
    } else {
        (cfg.network.clone(), None)
    };
    let scene = TrainingScene::new(dataset, cfg.render_settings(), network.light_code_source, network.light_code_dim)?;
    let tc: TrainConfig = cfg.train.clone();
    let mut trainer = match checkpoint {
        Some(ck) => Trainer::resume(&scene, tc, ck)?,
        None => Trainer::new(&scene, tc, network)?,
    };
    let result = trainer.run(Some(&out_dir), |it, loss| {
        if it % 100 == 0 {
            eprintln!("iter {it} loss {loss:.6e}");
        }
    });
    write_text(&out_dir.join("loss.csv"), &trainer.loss_csv())?;
    result?;
    trainer.save_checkpoint(out_dir.join("final.lfck"))?;
    let report = trainer.evaluate()?;
    write_text(&out_dir.join("metrics.txt"), &report.to_table())?;
    println!("psnr {} ssim {:.4}", format_psnr(report.psnr), report.ssim);
    Ok(())
}

pub fn gen_dataset(cfg: &RunConfig, spec_path: Option<&Path>) -> Result<(), Failure> {
    let spec: SphereSceneSpec = match spec_path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::config(format!("{}: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", p.display())))?
        }
        None => SphereSceneSpec { sampling: cfg.sampling, ..Default::default() },
    };
    let ds = generate_reference_dataset(&spec)?;
    let dir = cfg.output_or("dataset");
    let manifest = ds.save(&dir)?;
    println!("{}", manifest.display());
    Ok(())
}

pub fn gen_olat(cfg: &RunConfig, center: &[f64], radius_deg: f64, radiance: &[f64], rows: usize, cols: usize) -> Result<(), Failure> {
    if center.len() != 3 {
        return Err(Failure::config("--center expects x,y,z"));
    }
    let radiance = match radiance {
        [v] => Rgb::splat(*v),
        [r, g, b] => Rgb::new(*r, *g, *b),
        _ => return Err(Failure::config("--radiance expects 1 or 3 values")),
    };
    let spec = OlatSpec {
        center: Vec3::new(center[0], center[1], center[2]),
        angular_radius: radius_deg.to_radians(),
        radiance,
    };
    let map = generate_olat(&spec, rows, cols)?;
    let path = cfg.output_or("olat.hdr");
    map.save(&path)?;
    println!("{}", path.display());
    Ok(())
}

/// Shaded probe ball of one SH code, viewed along −z with unit albedo.
fn probe_tile(sh: &ShCoeffs12<f32>, size: usize, kernel: lumafield::shfield::CosineKernel) -> RgbImage {
    RgbImage::from_fn(size, size, |x, y| {
        let u = 2.0 * (x as f64 + 0.5) / size as f64 - 1.0;
        let v = 1.0 - 2.0 * (y as f64 + 0.5) / size as f64;
        let r2 = u * u + v * v;
        if r2 > 1.0 {
            return Rgb::zero();
        }
        let n = Vec3::new(u as f32, v as f32, (1.0 - r2).sqrt() as f32);
        sh.cosine_irradiance(n, kernel) * std::f32::consts::FRAC_1_PI
    })
}

pub fn probe_field(cfg: &RunConfig, grid: &[usize], tile: usize) -> Result<(), Failure> {
    let path = cfg
        .paths
        .checkpoint
        .as_ref()
        .ok_or_else(|| Failure::config("probe-field needs --paths.checkpoint"))?;
    let nets = load_checkpoint(path)?.networks;
    let [nx, ny, nz] = grid else {
        return Err(Failure::config("--grid expects nx,ny,nz"));
    };
    let (nx, ny, nz) = (*nx.max(&1), *ny.max(&1), *nz.max(&1));
    let map = scene::load_map(cfg.paths.hdri.as_deref())?;
    let env = Environment::new(map, &cfg.sampling, nets.config.light_code_source, nets.config.light_code_dim)?;
    let code: Vec<f32> = env.code.iter().map(|&v| v as f32).collect();
    let coord = |i: usize, n: usize| if n == 1 { 0.0 } else { -0.75 + 1.5 * i as f32 / (n - 1) as f32 };
    let omega = Vec3::new(0.0f32, 0.0, 1.0);
    let mut rows = Vec::new();
    for z in 0..nz {
        for y in (0..ny).rev() {
            let mut tiles = Vec::new();
            for x in 0..nx {
                let xn = Vec3::new(coord(x, nx), coord(y, ny), coord(z, nz));
                let sh = nets.light_field.eval(xn, omega, &code)?;
                tiles.push(probe_tile(&sh, tile, cfg.render.kernel));
            }
            rows.push(RgbImage::hstack(&tiles));
        }
    }
    let img = RgbImage::vstack(&rows);
    let stem = stem(cfg.output_or("probes"));
    save_image(&img, &stem, cfg.render.exposure)?;
    println!("{} tiles", nx * ny * nz);
    Ok(())
}

/// Fields for the ablations: the configured ones, or a spatially varying pattern lit by the map's SH.
fn ablation_fields(cfg: &RunConfig, fixed: Option<&str>, asset: &lumafield::assets::FaceAsset, map: &RadianceMap) -> Result<Box<dyn ShadingFields<f32>>, Failure> {
    if fixed.is_some() || cfg.paths.checkpoint.is_some() {
        return Ok(match scene::load_fields(cfg, fixed, asset)? {
            Fields::Networks(n) => n,
            Fields::Fixed(f) => Box::new(f),
        });
    }
    let sb = SceneBox::from_aabb(&asset.mesh.bounds());
    Ok(Box::new(PatternFields::standard(project_to_sh(map).cast(), sb)))
}

fn ablation_env(cfg: &RunConfig, map: RadianceMap, sampling: &LightSampling) -> Result<Environment, Failure> {
    Ok(Environment::new(map, sampling, cfg.network.light_code_source, cfg.network.light_code_dim)?)
}

/// Mean gradient magnitude of display luminance over the strongest `fraction` of pixels.
pub fn edge_gradient(img: &RgbImage, exposure: f64, fraction: f64) -> f64 {
    let enc = img.display_encoded(exposure);
    let lum: Vec<f64> = enc.iter().map(|p| 0.2126 * p[0] + 0.7152 * p[1] + 0.0722 * p[2]).collect();
    let w = img.width;
    let mut g = Vec::new();
    for y in 1..img.height.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            let gx = lum[y * w + x + 1] - lum[y * w + x - 1];
            let gy = lum[(y + 1) * w + x] - lum[(y - 1) * w + x];
            g.push(0.5 * (gx * gx + gy * gy).sqrt());
        }
    }
    g.sort_by(|a, b| b.total_cmp(a));
    let k = ((g.len() as f64 * fraction).ceil() as usize).clamp(1, g.len().max(1));
    g.iter().take(k).sum::<f64>() / k as f64
}

pub fn ablate(cfg: &RunConfig, mode: AblateMode, fixed: Option<&str>) -> Result<(), Failure> {
    let asset = scene::load_asset(cfg)?;
    let map = scene::load_map(cfg.paths.hdri.as_deref())?;
    let fields = ablation_fields(cfg, fixed, &asset, &map)?;
    let camera = scene::camera(cfg, cfg.render.width, cfg.render.height)?;
    let dir = cfg.output_or("ablate");
    create_dir(&dir)?;
    let base = cfg.render_settings();
    let exposure = cfg.render.exposure;
    let mut csv = String::new();
    match mode {
        AblateMode::Density => {
            let env = ablation_env(cfg, map, &cfg.sampling)?;
            csv.push_str("alpha_sigma,delta,laplacian_variance\n");
            let mut rows = Vec::new();
            for alpha in [1.0, 10.0] {
                let mut row = Vec::new();
                for delta in [0.05, 0.5, 2.0] {
                    let s = RenderSettings { density: lumafield::transport::DensityParams { alpha_sigma: alpha, delta }, ..base };
                    let out = render_image(&asset, &camera, fields.as_ref(), &env, &s)?;
                    let lv = laplacian_variance(&out.image, exposure);
                    let _ = writeln!(csv, "{alpha},{delta},{lv:e}");
                    save_image(&out.image, &dir.join(format!("density_a{alpha}_d{delta}")), exposure)?;
                    row.push(out.image);
                }
                rows.push(RgbImage::hstack(&row));
            }
            save_image(&RgbImage::vstack(&rows), &dir.join("density_grid"), exposure)?;
            write_text(&dir.join("density.csv"), &csv)?;
        }
        AblateMode::Sampling => {
            csv.push_str("mode,lights,edge_gradient,laplacian_variance\n");
            let mut imgs = Vec::new();
            for (name, uniform) in [("importance", false), ("uniform", true)] {
                let sampling = LightSampling { uniform_mode: uniform, ..cfg.sampling };
                let env = ablation_env(cfg, map.clone(), &sampling)?;
                let out = render_image(&asset, &camera, fields.as_ref(), &env, &base)?;
                let eg = edge_gradient(&out.image, exposure, 0.01);
                let lv = laplacian_variance(&out.image, exposure);
                let _ = writeln!(csv, "{name},{},{eg:e},{lv:e}", env.lights.len());
                save_image(&out.image, &dir.join(format!("sampling_{name}")), exposure)?;
                imgs.push(out.image);
            }
            save_image(&RgbImage::hstack(&imgs), &dir.join("sampling_grid"), exposure)?;
            write_text(&dir.join("sampling.csv"), &csv)?;
        }
        AblateMode::MaterialLayers => {
            let env = ablation_env(cfg, map, &cfg.sampling)?;
            let out = render_image(&asset, &camera, fields.as_ref(), &env, &base)?;
            let stem = dir.join("layers");
            save_image(&out.image, &stem, exposure)?;
            write_layers(&out, &stem, exposure)?;
            let l = &out.layers;
            let mut max_err = 0.0f64;
            for i in 0..out.image.data.len() {
                let sum = l.specular.data[i].to_f64() + l.diffuse.data[i].to_f64() + l.sss.data[i].to_f64()
                    + l.background.data[i].to_f64();
                let d = sum - out.image.data[i].to_f64();
                max_err = max_err.max(d.r.abs()).max(d.g.abs()).max(d.b.abs());
            }
            let strip = RgbImage::hstack(&[l.diffuse.clone(), l.specular.clone(), l.sss.clone(), out.image.clone()]);
            save_image(&strip, &dir.join("layers_strip"), exposure)?;
            csv.push_str("max_abs_error\n");
            let _ = writeln!(csv, "{max_err:e}");
            write_text(&dir.join("layers.csv"), &csv)?;
        }
    }
    print!("{csv}");
    Ok(())
}

pub fn bench(cfg: &RunConfig, resolutions: &[usize], repeats: usize, fixed: Option<&str>) -> Result<(), Failure> {
    let asset = scene::load_asset(cfg)?;
    let fixed = fixed.or(if cfg.paths.checkpoint.is_none() { Some("0.5,0.2") } else { None });
    let fields = scene::load_fields(cfg, fixed, &asset)?;
    let env = env_for(cfg, &fields, scene::load_map(cfg.paths.hdri.as_deref())?)?;
    let settings = cfg.render_settings();
    let mut csv = String::from("res,seconds\n");
    for &res in resolutions {
        let camera: Camera = scene::camera(cfg, res, res)?;
        let mut times = Vec::new();
        for _ in 0..repeats.max(1) {
            times.push(render_image(&asset, &camera, &fields, &env, &settings)?.timing.seconds);
        }
        times.sort_by(f64::total_cmp);
        let _ = writeln!(csv, "{res},{:.6}", times[times.len() / 2]);
    }
    if let Some(p) = &cfg.paths.output {
        write_text(p, &csv)?;
    }
    print!("{csv}");
    Ok(())
}

fn load_image(path: &Path) -> Result<RgbImage, Failure> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("hdr") => Ok(RadianceMap::load(path)?.image),
        Some("png") => {
            let tex = TextureMap::load(path, ColorSpace::Linear)?;
            let g = lumafield::image::DISPLAY_GAMMA as f32;
            let mut img = tex.image;
            for p in &mut img.data {
                *p = Rgb::new(p.r.powf(g), p.g.powf(g), p.b.powf(g));
            }
            Ok(img)
        }
        _ => Err(Failure::config(format!("{}: expected a .hdr or .png image", path.display()))),
    }
}

pub fn metrics(rendered: &Path, reference: &Path) -> Result<(), Failure> {
    let a = load_image(rendered)?;
    let b = load_image(reference)?;
    println!("psnr {}", format_psnr(psnr(&a, &b)?));
    println!("ssim {:.6}", ssim(&a, &b)?);
    Ok(())
}
