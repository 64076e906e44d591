use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;

use vcmesh::mesh::{bridge_components, write_obj, MeshTopology, ObjMesh, Split, VertexFeatures};
use vcmesh::model::{
    build_autoencoder, evaluate_l1, interpolate_latent, load_checkpoint, mean_euclidean_error, mix_latent,
    save_checkpoint, AutoencoderModel, LatentCode, Trainer,
};
use vcmesh::sampling::{build_hierarchy as build_levels, SamplingHierarchy};
use vcmesh::synthetic::{base_mesh, make_synthetic as deform, BaseShape};
use vcmesh::verify;

use crate::config::{glob_files, parse_level, require_file, RunConfig};
use crate::data::{load_dataset, load_mesh, parse_vertices, same_base};
use crate::{Base, Failure, ModelArgs, Scale};

fn print_summary(h: &SamplingHierarchy) {
    println!("level\tstride\tradius\tvertices\tdown_mean\tdown_max\tup_mean\tup_max");
    println!("0\t-\t-\t{}\t-\t-\t-\t-", h.base.num_vertices());
    for s in h.summary() {
        println!(
            "{}\t{}\t{}\t{}\t{:.2}\t{}\t{:.2}\t{}",
            s.level, s.stride, s.radius, s.coarse_vertices, s.down_mean, s.down_max, s.up_mean, s.up_max
        );
    }
    println!("fingerprint\t{:016x}", h.fingerprint());
}

/// The mesh topology, bridged when a threshold is given.
fn base_topology(m: &ObjMesh, bridge: Option<f64>) -> Result<MeshTopology, Failure> {
    match bridge {
        None => Ok(m.topology.clone()),
        Some(t) => {
            let bridged = bridge_components(&m.topology, &m.positions, t)?;
            let added = bridged.num_edges() - m.topology.num_edges();
            if added > 0 {
                log::info!("bridging added {added} edges");
            }
            Ok(bridged)
        }
    }
}

pub fn build_hierarchy(
    mesh: &Path,
    levels: &[String],
    seed: u64,
    bridge: Option<f64>,
    out: &Path,
) -> Result<(), Failure> {
    require_file(mesh)?;
    let specs = levels.iter().map(|l| parse_level(l)).collect::<Result<Vec<_>, _>>()?;
    let m = load_mesh(mesh)?;
    let h = build_levels(&base_topology(&m, bridge)?, &specs, seed)?;
    h.write_file(out)?;
    print_summary(&h);
    Ok(())
}

fn load_model(args: &ModelArgs) -> Result<(SamplingHierarchy, AutoencoderModel), Failure> {
    require_file(&args.hierarchy)?;
    require_file(&args.ckpt)?;
    let h = SamplingHierarchy::read_file(&args.hierarchy)?;
    let (model, _) = load_checkpoint(&args.ckpt, &h)?;
    Ok((h, model))
}

/// A mesh file that must sit on the model's base topology.
fn load_input(path: &Path, base: &MeshTopology) -> Result<ObjMesh, Failure> {
    require_file(path)?;
    let m = load_mesh(path)?;
    if !same_base(&m.topology, base) {
        return Err(Failure::Input(format!(
            "{}: connectivity differs from the hierarchy's base mesh",
            path.display()
        )));
    }
    Ok(m)
}

pub fn train(config: &Path, resume: Option<&Path>) -> Result<(), Failure> {
    let cfg = RunConfig::load(config)?;
    let files = cfg.dataset_files()?;
    if let Some(r) = resume {
        require_file(r)?;
    }
    let out = &cfg.output.dir;
    fs::create_dir_all(out)?;

    let base = load_mesh(cfg.data.mesh.as_deref().unwrap_or(&files[0]))?;
    let hierarchy = match &cfg.hierarchy.file {
        Some(f) => SamplingHierarchy::read_file(f)?,
        None => build_levels(
            &base_topology(&base, cfg.data.bridge)?,
            &cfg.level_specs()?,
            cfg.hierarchy.seed,
        )?,
    };
    let data = load_dataset(
        &files,
        &hierarchy.base,
        cfg.data.train_fraction,
        cfg.data.validation_fraction,
        cfg.data.split_seed,
    )?;
    hierarchy.write_file(out.join("hierarchy.bin"))?;

    let (mut model, state) = match resume {
        Some(r) => {
            let (model, state) = load_checkpoint(r, &hierarchy)?;
            let state = state.ok_or_else(|| Failure::Input(format!("{} has no training state", r.display())))?;
            if model.net.channels != cfg.model.channels {
                return Err(Failure::Input(format!(
                    "checkpoint channel plan {:?} differs from model.channels {:?}",
                    model.net.channels, cfg.model.channels
                )));
            }
            (model, Some(state))
        }
        None => (build_autoencoder(&hierarchy, &cfg.model_config()?)?, None),
    };
    log::info!("model has {} parameters", model.param_count());

    let log_path = out.join("train.tsv");
    let mut log_file = OpenOptions::new()
        .create(true)
        .append(resume.is_some())
        .write(true)
        .truncate(resume.is_none())
        .open(&log_path)?;
    if resume.is_none() {
        writeln!(log_file, "# epoch\tlr\ttrain_l1\tval_l1")?;
    }
    let every = cfg.train.checkpoint_every;
    let tc = cfg.train_config();
    let mut trainer = match state {
        Some(s) => Trainer::resume(&mut model, &data, tc, s)?,
        None => Trainer::new(&mut model, &data, tc)?,
    };
    trainer.run(|e, t| {
        writeln!(log_file, "{}", e.tsv_line())?;
        println!("{}", e.tsv_line());
        if every > 0 && (e.epoch + 1) % every == 0 {
            save_checkpoint(out.join(format!("epoch_{:04}.ckpt", e.epoch)), t.model(), Some(&t.state))?;
        }
        Ok(())
    })?;
    save_checkpoint(out.join("final.ckpt"), trainer.model(), Some(&trainer.state))?;
    let steps = trainer.state.total_steps;
    let test = data.indices(Split::Test);
    if !test.is_empty() {
        println!("test_l1\t{}", evaluate_l1(trainer.model(), &data, &test)?);
    }
    println!("steps\t{steps}");
    Ok(())
}

pub fn reconstruct(args: &ModelArgs, mesh: Option<&Path>, dataset: Option<&str>, out: &Path) -> Result<(), Failure> {
    let files = match (mesh, dataset) {
        (Some(m), _) => {
            require_file(m)?;
            vec![m.to_path_buf()]
        }
        (None, Some(g)) => glob_files(g)?,
        (None, None) => return Err(Failure::Input("pass --mesh or --dataset".into())),
    };
    let (h, model) = load_model(args)?;
    fs::create_dir_all(out)?;
    let mut total = 0.0;
    for f in &files {
        let m = load_input(f, &h.base)?;
        let y = model.reconstruct(&m.positions)?;
        let name = f.file_stem().map_or("mesh".into(), |s| s.to_string_lossy().into_owned());
        write_obj(out.join(format!("{name}.obj")), &y, &m.faces)?;
        let err = mean_euclidean_error(&y, &m.positions)?;
        total += err;
        println!("{}\t{err}", f.display());
    }
    println!("mean\t{}", total / files.len() as f64);
    Ok(())
}

pub fn encode(args: &ModelArgs, mesh: &Path, out: &Path) -> Result<(), Failure> {
    let (h, model) = load_model(args)?;
    let m = load_input(mesh, &h.base)?;
    fs::write(out, model.encode(&m.positions)?.to_text())?;
    Ok(())
}

fn faces_of(template: Option<&Path>, vertices: usize) -> Result<Vec<Vec<usize>>, Failure> {
    let Some(t) = template else {
        return Ok(Vec::new());
    };
    require_file(t)?;
    let m = load_mesh(t)?;
    if m.topology.num_vertices() != vertices {
        return Err(Failure::Input(format!(
            "template {} has {} vertices, model has {vertices}",
            t.display(),
            m.topology.num_vertices()
        )));
    }
    Ok(m.faces)
}

pub fn decode(args: &ModelArgs, code: &Path, template: Option<&Path>, out: &Path) -> Result<(), Failure> {
    require_file(code)?;
    let (h, model) = load_model(args)?;
    let faces = faces_of(template, h.base.num_vertices())?;
    let code = LatentCode::from_text(&fs::read_to_string(code)?)?;
    write_obj(out, &model.decode(&code)?, &faces)?;
    Ok(())
}

pub fn interpolate(
    args: &ModelArgs,
    source: &Path,
    target: &Path,
    vertices: &str,
    steps: usize,
    out: &Path,
) -> Result<(), Failure> {
    if steps == 0 {
        return Err(Failure::Input("--steps must be at least 1".into()));
    }
    let (h, model) = load_model(args)?;
    let src = load_input(source, &h.base)?;
    let tgt = load_input(target, &h.base)?;
    let subset = parse_vertices(vertices, h.latent_vertices())?;
    let (a, b) = (model.encode(&src.positions)?, model.encode(&tgt.positions)?);
    fs::create_dir_all(out)?;
    for k in 0..steps {
        let t = if steps == 1 { 0.0 } else { k as f64 / (steps - 1) as f64 };
        let frame = model.decode(&interpolate_latent(&a, &b, &subset, t)?)?;
        let path = out.join(format!("frame_{k:04}.obj"));
        write_obj(&path, &frame, &src.faces)?;
        println!("{}\t{t}", path.display());
    }
    Ok(())
}

pub fn mix(args: &ModelArgs, base: &Path, donor: &Path, vertices: &str, out: &Path) -> Result<(), Failure> {
    let (h, model) = load_model(args)?;
    let b = load_input(base, &h.base)?;
    let d = load_input(donor, &h.base)?;
    let subset = parse_vertices(vertices, h.latent_vertices())?;
    let code = mix_latent(&model.encode(&b.positions)?, &model.encode(&d.positions)?, &subset)?;
    write_obj(out, &model.decode(&code)?, &b.faces)?;
    Ok(())
}

pub fn gradcheck(scale: Scale, seed: u64) -> Result<(), Failure> {
    let mesh = match scale {
        Scale::Small => base_mesh(BaseShape::Grid, 2)?,
        Scale::Full => base_mesh(BaseShape::Icosphere, 2)?,
    };
    println!("graph\t{} vertices", mesh.topology.num_vertices());
    let mut failing = Vec::new();
    for (name, err) in verify::gradient_suite(&mesh.topology, seed)? {
        let ok = err < verify::TOLERANCE;
        println!("{name}\t{err:.3e}\t{}", if ok { "ok" } else { "FAIL" });
        if !ok {
            failing.push(name);
        }
    }
    if failing.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verification(format!(
            "relative error above {:e} in {}",
            verify::TOLERANCE,
            failing.join(", ")
        )))
    }
}

pub fn stats(args: &ModelArgs) -> Result<(), Failure> {
    let (h, model) = load_model(args)?;
    println!("layer\tin\tout\tM\tsum_E\tparams");
    for l in model.net.layer_counts() {
        let m = l.basis_size.map_or("-".to_string(), |m| m.to_string());
        println!(
            "{}\t{}\t{}\t{m}\t{}\t{}",
            l.name, l.in_channels, l.out_channels, l.total_neighbors, l.count
        );
    }
    println!("total\t{}", model.param_count());
    let (v, c) = model.net.latent_shape();
    println!("latent\t{v} x {c}");
    println!("latent_vertex\tbase_anchor");
    for l in 0..v {
        println!("{l}\t{}", h.anchor(l));
    }
    Ok(())
}

pub fn make_synthetic(base: Base, subdiv: usize, samples: usize, seed: u64, amplitude: f64, out: &Path) -> Result<(), Failure> {
    if samples == 0 {
        return Err(Failure::Input("--samples must be positive".into()));
    }
    if !(amplitude.is_finite() && amplitude >= 0.0) {
        return Err(Failure::Input("--amplitude must be a non-negative number".into()));
    }
    let shape = match base {
        Base::Icosphere => BaseShape::Icosphere,
        Base::Grid => BaseShape::Grid,
    };
    let mesh = base_mesh(shape, subdiv)?;
    let data: Vec<VertexFeatures> = deform(&mesh.positions, samples, seed, amplitude)?;
    fs::create_dir_all(out)?;
    write_obj(out.join("base.obj"), &mesh.positions, &mesh.faces)?;
    for (k, s) in data.iter().enumerate() {
        write_obj(out.join(format!("sample_{k:04}.obj")), s, &mesh.faces)?;
    }
    println!(
        "wrote {samples} samples of {} vertices to {}",
        mesh.topology.num_vertices(),
        out.display()
    );
    Ok(())
}
