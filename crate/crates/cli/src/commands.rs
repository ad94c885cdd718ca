use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use evframe::augment::{apply_geometric, noise_mask, sample_augment, variable_length_segment, AugmentRanges, Interval};
use evframe::io::{evb_geometry, load_stream_with, LoadOptions};
use evframe::manifest::{Manifest, ManifestEntry};
use evframe::metrics::{eval_report, pck_curve, Sweep};
use evframe::segment::{segment_by_count, SegmentSpec};
use evframe::simulator::{simulate, SceneConfig};
use evframe::{
    write_stream, BinningMap, EventStream, Format, Frame, KeypointSet, Representation, Segment, SensorGeometry,
    TailPolicy, Trajectory,
};
use rayon::prelude::*;

use crate::{Cli, Command, InputArgs, RenderArgs};

struct Ctx {
    seed: Option<u64>,
    quiet: bool,
}

impl Ctx {
    fn note(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

pub(crate) fn execute(cli: Cli) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .context("starting worker threads")?;
    let ctx = Ctx {
        seed: cli.seed,
        quiet: cli.quiet,
    };
    pool.install(|| match cli.command {
        Command::Simulate { config, out, traj } => simulate_cmd(&ctx, &config, &out, traj.as_deref()),
        Command::Segment {
            input,
            segment,
            tail,
            out,
        } => segment_cmd(&ctx, &input, &segment, &tail, out.as_deref()),
        Command::Render(args) => render_cmd(&ctx, &args, None),
        Command::Denoise { render, sigma, eps } => render_cmd(&ctx, &render, Some((sigma, eps))),
        Command::Augment {
            input,
            traj,
            events,
            anchor_ms,
            per_anchor,
            rep,
            size,
            rotations,
            fine_rotation,
            crop,
            length,
            eps,
            sigma,
            out,
        } => {
            let stream = load_input(&input)?;
            let map = binning(stream.geometry(), size.as_deref())?;
            let mut ranges = AugmentRanges::new(map.output());
            ranges.rotation_quarters = parse_list(&rotations, "--rotations")?;
            ranges.fine_rotation_deg = parse_interval(&fine_rotation, "--fine-rotation")?;
            ranges.crop_size = crop
                .as_deref()
                .map(parse_geometry)
                .transpose()?
                .map(|g| (g.width, g.height));
            ranges.length_multiplier = parse_interval(&length, "--length")?;
            ranges.noise_threshold = parse_interval(&eps, "--eps")?;
            ranges.filter_sizes = parse_list(&sigma, "--sigma")?;
            let job = AugmentJob {
                stream: &stream,
                source: &input.input,
                traj: read_trajectory(&traj)?,
                base_events: events,
                anchor_us: anchor_ms.map(|ms| (ms * 1000.0).round() as u64),
                per_anchor,
                rep: rep.parse()?,
                map,
                ranges,
                out: &out,
            };
            augment_cmd(&ctx, job)
        }
        Command::Eval { pred, gt, sweep, out } => eval_cmd(&ctx, &pred, &gt, &sweep, out.as_deref()),
        Command::Stats { input } => stats_cmd(&input),
    })
}

fn parse_geometry(s: &str) -> Result<SensorGeometry> {
    s.parse::<SensorGeometry>()
        .with_context(|| format!("bad size {s:?}, expected WxH"))
}

fn parse_list<T: std::str::FromStr>(s: &str, flag: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|p| p.trim().parse().map_err(|_| anyhow!("bad value {p:?} in {flag}")))
        .collect()
}

fn parse_interval(s: &str, flag: &str) -> Result<Interval> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| anyhow!("{flag} expects lo:hi, got {s:?}"))?;
    let lo: f64 = lo.trim().parse().map_err(|_| anyhow!("bad lower bound in {flag}"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| anyhow!("bad upper bound in {flag}"))?;
    if lo > hi {
        bail!("{flag} range {lo}:{hi} is empty");
    }
    Ok(Interval::new(lo, hi))
}

fn load_input(args: &InputArgs) -> Result<EventStream> {
    let path = &args.input;
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let format = match &args.format {
        Some(f) => f.parse()?,
        None => Format::from_path(path)
            .ok_or_else(|| anyhow!("cannot tell the format of {}; pass --format", path.display()))?,
    };
    let geometry = match (&args.geometry, format) {
        (Some(g), _) => parse_geometry(g)?,
        (None, Format::Evb) => evb_geometry(&bytes)?,
        (None, Format::Csv) => bail!("csv input needs --geometry WxH"),
    };
    let opts = LoadOptions {
        polarity_less: args.polarity_less,
    };
    load_stream_with(&bytes, format, geometry, opts).with_context(|| format!("loading {}", path.display()))
}

fn read_trajectory(path: &Path) -> Result<Trajectory> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Trajectory::from_csv(&text).with_context(|| format!("parsing {}", path.display()))
}

fn binning(input: SensorGeometry, size: Option<&str>) -> Result<BinningMap> {
    let output = size.map(parse_geometry).transpose()?.unwrap_or(input);
    Ok(BinningMap::new(input, output)?)
}

/// Rescales sensor-pixel keypoints to the binned frame.
fn scale_keypoints(kps: &KeypointSet, map: &BinningMap) -> KeypointSet {
    let (i, o) = (map.input(), map.output());
    let sx = o.width as f64 / i.width as f64;
    let sy = o.height as f64 / i.height as f64;
    kps.map(|[u, v, z]| [u * sx, v * sy, z])
}

/// Timestamp a segment's label refers to: the end of its nominal interval.
fn label_time(seg: &Segment) -> u64 {
    seg.bounds().1.saturating_sub(1)
}

fn write_label(dir: &Path, name: &str, t: u64, kps: KeypointSet) -> Result<()> {
    let single = Trajectory::new(vec![(t, kps)])?;
    fs::write(dir.join(name), single.to_csv())?;
    Ok(())
}

fn write_previews(dir: &Path, id: &str, frame: &Frame) -> Result<()> {
    let (_, h, w) = frame.shape();
    for (c, ch) in frame.channels().iter().enumerate() {
        let pixels: Vec<u8> = frame
            .plane(c)
            .iter()
            .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect();
        let img = image::GrayImage::from_raw(w as u32, h as u32, pixels).expect("plane matches frame size");
        let label = ch
            .label()
            .to_ascii_lowercase()
            .replace('+', "_pos")
            .replace('-', "_neg");
        let path = dir.join(format!("{id}_{c}_{label}.png"));
        img.save_with_format(&path, image::ImageFormat::Png)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn simulate_cmd(ctx: &Ctx, config: &Path, out: &Path, traj: Option<&Path>) -> Result<()> {
    let text = fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let mut scene = SceneConfig::from_toml(&text).with_context(|| format!("parsing {}", config.display()))?;
    if let Some(seed) = ctx.seed {
        scene.seed = seed;
    }
    let (stream, trajectory) = simulate(&scene)?;
    let format = Format::from_path(out).unwrap_or(Format::Evb);
    fs::write(out, write_stream(&stream, format)).with_context(|| format!("writing {}", out.display()))?;
    if let Some(t) = traj {
        fs::write(t, trajectory.to_csv()).with_context(|| format!("writing {}", t.display()))?;
    }
    ctx.note(format!(
        "simulated {} events over {} us",
        stream.len(),
        scene.duration_us
    ));
    Ok(())
}

fn segment_cmd(ctx: &Ctx, input: &InputArgs, spec: &str, tail: &str, out: Option<&Path>) -> Result<()> {
    let stream = load_input(input)?;
    let spec: SegmentSpec = spec.parse()?;
    let segments = spec.apply(&stream, tail.parse()?)?;
    let mut table = String::from("index,first_event,events,t_start,t_end,capped,provenance\n");
    for (i, s) in segments.iter().enumerate() {
        let (t0, t1) = s.bounds();
        table.push_str(&format!(
            "{i},{},{},{t0},{t1},{},{}\n",
            s.offset(),
            s.len(),
            s.capped(),
            s.provenance()
        ));
    }
    match out {
        Some(p) => fs::write(p, table).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{table}"),
    }
    ctx.note(format!("{} segments", segments.len()));
    Ok(())
}

fn render_cmd(ctx: &Ctx, args: &RenderArgs, denoise: Option<(usize, f64)>) -> Result<()> {
    if let Some((sigma, eps)) = denoise {
        if sigma == 0 || sigma % 2 == 0 {
            bail!("--sigma must be a positive odd integer, got {sigma}");
        }
        if !(eps.is_finite() && eps >= 0.0) {
            bail!("--eps must be non-negative, got {eps}");
        }
    }
    let stream = load_input(&args.input)?;
    let spec: SegmentSpec = args.segment.parse()?;
    let tail: TailPolicy = args.tail.parse()?;
    let rep: Representation = args.rep.parse()?;
    let map = binning(stream.geometry(), args.size.as_deref())?;
    let traj = args.traj.as_deref().map(read_trajectory).transpose()?;
    let segments = spec.apply(&stream, tail)?;
    let out = &args.out;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let source = args.input.input.display().to_string();
    let entries = segments
        .par_iter()
        .enumerate()
        .map(|(i, seg)| {
            let mut frame = rep.render(seg, &map)?;
            if let Some((sigma, eps)) = denoise {
                let ec = Representation::Ec.render(seg, &map)?;
                frame = noise_mask(&ec, sigma, eps)?.apply(&frame)?;
            }
            let id = format!("seg_{i:06}");
            let frame_name = format!("{id}.evf");
            fs::write(out.join(&frame_name), frame.to_evf())?;
            if args.preview {
                write_previews(out, &id, &frame)?;
            }
            let keypoints = match &traj {
                Some(traj) => {
                    let t = label_time(seg);
                    let pose = traj.pose_at(t).ok_or_else(|| anyhow!("trajectory is empty"))?;
                    let name = format!("{id}.kp.csv");
                    write_label(out, &name, t, scale_keypoints(&pose, &map))?;
                    Some(name)
                }
                None => None,
            };
            Ok(ManifestEntry {
                id,
                source: source.clone(),
                provenance: seg.provenance(),
                bounds: seg.bounds(),
                event_count: seg.len(),
                representation: rep.name().to_string(),
                frame: frame_name,
                keypoints,
                augment: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut params = BTreeMap::from([
        (
            "command".to_string(),
            if denoise.is_some() { "denoise" } else { "render" }.to_string(),
        ),
        ("input".to_string(), source.clone()),
        ("segment".to_string(), spec.to_string()),
        ("tail".to_string(), args.tail.clone()),
        ("representation".to_string(), rep.name().to_string()),
        ("size".to_string(), map.output().to_string()),
    ]);
    if let Some((sigma, eps)) = denoise {
        params.insert("sigma".into(), sigma.to_string());
        params.insert("eps".into(), eps.to_string());
    }
    if let Some(t) = &args.traj {
        params.insert("trajectory".into(), t.display().to_string());
    }
    let mut manifest = Manifest::new(params);
    manifest.entries = entries;
    manifest.write(&out.join("manifest.json"))?;
    ctx.note(format!("wrote {} frames to {}", manifest.entries.len(), out.display()));
    Ok(())
}

struct AugmentJob<'a> {
    stream: &'a EventStream,
    source: &'a Path,
    traj: Trajectory,
    base_events: usize,
    anchor_us: Option<u64>,
    per_anchor: usize,
    rep: Representation,
    map: BinningMap,
    ranges: AugmentRanges,
    out: &'a Path,
}

fn sample_seed(base: u64, index: u64) -> u64 {
    base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn augment_cmd(ctx: &Ctx, job: AugmentJob) -> Result<()> {
    if job.base_events == 0 || job.per_anchor == 0 {
        bail!("--events and --per-anchor must be positive");
    }
    if job.traj.samples().first().is_some_and(|(_, k)| k.dim() != 2) {
        bail!("augment needs a 2D keypoint trajectory");
    }
    let anchors: Vec<u64> = match (job.anchor_us, job.stream.time_span()) {
        (_, None) => Vec::new(),
        (Some(0), _) => bail!("--anchor-ms must be positive"),
        (Some(dt), Some((first, last))) => (1..).map(|k| first + k * dt).take_while(|&t| t <= last).collect(),
        (None, Some(_)) => segment_by_count(job.stream, job.base_events, TailPolicy::Drop)?
            .iter()
            .map(label_time)
            .collect(),
    };
    let base_seed = ctx.seed.unwrap_or(0);
    fs::create_dir_all(job.out).with_context(|| format!("creating {}", job.out.display()))?;
    let source = job.source.display().to_string();

    let jobs: Vec<(usize, u64)> = anchors
        .iter()
        .flat_map(|&t| std::iter::repeat_n(t, job.per_anchor))
        .enumerate()
        .collect();
    let entries = jobs
        .par_iter()
        .map(|&(i, anchor)| {
            let spec = sample_augment(&job.ranges, sample_seed(base_seed, i as u64))?;
            let seg = variable_length_segment(job.stream, anchor, job.base_events, spec.length_multiplier)?;
            let frame = job.rep.render(&seg, &job.map)?;
            let ec = Representation::Ec.render(&seg, &job.map)?;
            let frame = noise_mask(&ec, spec.filter_size, spec.noise_threshold)?.apply(&frame)?;
            let pose = job.traj.pose_at(anchor).ok_or_else(|| anyhow!("trajectory is empty"))?;
            let (frame, kps) = apply_geometric(&frame, &scale_keypoints(&pose, &job.map), &spec)?;

            let id = format!("aug_{i:06}");
            let frame_name = format!("{id}.evf");
            fs::write(job.out.join(&frame_name), frame.to_evf())?;
            let kp_name = format!("{id}.kp.csv");
            write_label(job.out, &kp_name, anchor, kps)?;
            Ok(ManifestEntry {
                id,
                source: source.clone(),
                provenance: seg.provenance(),
                bounds: seg.bounds(),
                event_count: seg.len(),
                representation: job.rep.name().to_string(),
                frame: frame_name,
                keypoints: Some(kp_name),
                augment: Some(spec),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let params = BTreeMap::from([
        ("command".to_string(), "augment".to_string()),
        ("input".to_string(), source),
        ("events".to_string(), job.base_events.to_string()),
        ("representation".to_string(), job.rep.name().to_string()),
        ("size".to_string(), job.map.output().to_string()),
        ("seed".to_string(), base_seed.to_string()),
        (
            "ranges".to_string(),
            serde_json::to_string(&job.ranges).expect("ranges serialize"),
        ),
    ]);
    let mut manifest = Manifest::new(params);
    manifest.entries = entries;
    manifest.write(&job.out.join("manifest.json"))?;
    ctx.note(format!(
        "wrote {} augmented samples to {}",
        manifest.entries.len(),
        job.out.display()
    ));
    Ok(())
}

fn eval_cmd(ctx: &Ctx, pred: &Path, gt: &Path, sweep: &str, out: Option<&Path>) -> Result<()> {
    let sweep: Sweep = sweep.parse()?;
    let pred = read_trajectory(pred)?;
    let gt = read_trajectory(gt)?;
    if pred.is_empty() {
        bail!("no predictions to evaluate");
    }
    // ground truth is interpolated at each prediction time
    let (preds, gts): (Vec<KeypointSet>, Vec<KeypointSet>) = pred
        .samples()
        .iter()
        .map(|(t, k)| {
            let g = gt.pose_at(*t).ok_or_else(|| anyhow!("ground truth is empty"))?;
            Ok((k.clone(), g))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    let curve = pck_curve(&preds, &gts, &sweep)?;
    let report = eval_report(&curve, &sweep, preds.len(), preds[0].dim());
    match out {
        Some(p) => fs::write(p, &report).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{report}"),
    }
    ctx.note(format!("AUCp = {:.6}", curve.area()));
    Ok(())
}

fn stats_cmd(input: &InputArgs) -> Result<()> {
    let stream = load_input(input)?;
    let g = stream.geometry();
    let mut per_pixel = vec![0u32; g.pixel_count()];
    let mut positive = 0usize;
    for e in stream.events() {
        per_pixel[e.y as usize * g.width as usize + e.x as usize] += 1;
        positive += usize::from(e.p == evframe::Polarity::Pos);
    }
    println!("events = {}", stream.len());
    println!("geometry = \"{g}\"");
    println!("positive = {positive}");
    println!("negative = {}", stream.len() - positive);
    println!("active_pixels = {}", per_pixel.iter().filter(|&&c| c > 0).count());
    println!(
        "max_events_per_pixel = {}",
        per_pixel.iter().max().copied().unwrap_or(0)
    );
    if let Some((first, last)) = stream.time_span() {
        let span = last - first;
        println!("t_first = {first}");
        println!("t_last = {last}");
        println!("duration_us = {span}");
        if span > 0 {
            println!("rate_ev_per_s = {:.1}", stream.len() as f64 * 1e6 / span as f64);
        }
    }
    Ok(())
}
