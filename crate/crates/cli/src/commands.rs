use anyhow::{bail, ensure, Context, Result};
use pure_codec::bitstream::{self, PacketHeader, StreamGeometry};
use pure_codec::config::{
    EnhanceConfig, KvConfig, CORPUS_KEYS, ENHANCE_KEYS, FRONTEND_KEYS, TRAIN_KEYS,
};
use pure_codec::entropy::{code_entropy, pe_reduction, perceptual_entropy, PEConfig};
use pure_codec::eval::{embedding_mse, sdr_db, EvalReport};
use pure_codec::frontend::{enhance, measured_snr_db, CorpusSpec, Filterbank, FrontendConfig};
use pure_codec::model::CodecModel;
use pure_codec::rvq::{quantize, quantize_pure, reconstruct};
use pure_codec::training::{train_stack, TrainConfig};
use pure_codec::wav::{as_stored_f32, read_wav, read_wav_at, write_wav, WavFormat};
use std::fs;
use std::path::{Path, PathBuf};

const CORPUS_KEY: &[&str] = &["corpus"];
const MANIFEST: &str = "manifest.tsv";
const CONFIG_ECHO: &str = "config.txt";

fn load_config(path: Option<&Path>) -> Result<KvConfig> {
    let kv = match path {
        Some(p) => KvConfig::load(p).with_context(|| format!("reading config {}", p.display()))?,
        None => KvConfig::default(),
    };
    kv.check_keys(&[
        CORPUS_KEYS,
        FRONTEND_KEYS,
        ENHANCE_KEYS,
        TRAIN_KEYS,
        CORPUS_KEY,
    ])?;
    Ok(kv)
}

fn create_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))
}

pub fn gen_data(config: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<()> {
    let mut kv = load_config(config)?;
    if let Some(s) = seed {
        kv.set("seed", s);
    }
    let spec = CorpusSpec::from_kv(&kv)?;
    let pairs = pure_codec::frontend::generate_corpus(&spec)?;

    create_dir(out)?;
    let mut manifest = String::from("index\tclean\tnoisy\tsnr_db\n");
    for (i, pair) in pairs.iter().enumerate() {
        let clean_name = format!("clean_{i:04}.wav");
        let noisy_name = format!("noisy_{i:04}.wav");
        write_wav(&out.join(&clean_name), &pair.clean, WavFormat::Float32)?;
        write_wav(&out.join(&noisy_name), &pair.noisy, WavFormat::Float32)?;
        // realized on the stored float samples
        let snr = measured_snr_db(
            as_stored_f32(&pair.clean).samples(),
            as_stored_f32(&pair.noisy).samples(),
        );
        manifest.push_str(&format!("{i}\t{clean_name}\t{noisy_name}\t{snr:.6}\n"));
    }
    fs::write(out.join(MANIFEST), manifest)?;

    let mut echo = KvConfig::default();
    spec.write_kv(&mut echo);
    fs::write(out.join(CONFIG_ECHO), echo.render())?;
    println!("wrote {} pairs to {}", pairs.len(), out.display());
    Ok(())
}

/// `(clean, noisy)` paths listed in a corpus manifest.
fn read_manifest(corpus: &Path) -> Result<Vec<(PathBuf, PathBuf)>> {
    let path = corpus.join(MANIFEST);
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let mut rows = Vec::new();
    for (no, line) in text.lines().enumerate().skip(1) {
        let fields: Vec<&str> = line.split('\t').collect();
        ensure!(
            fields.len() == 4,
            "{}: line {} has {} fields, expected 4",
            path.display(),
            no + 1,
            fields.len()
        );
        rows.push((corpus.join(fields[1]), corpus.join(fields[2])));
    }
    ensure!(!rows.is_empty(), "{} lists no utterances", path.display());
    Ok(rows)
}

pub struct TrainOverrides {
    pub corpus: Option<PathBuf>,
    pub seed: Option<u64>,
    pub p_enh: Option<f64>,
    pub delay_steps: Option<usize>,
}

pub fn train(config: Option<&Path>, overrides: TrainOverrides, out: &Path) -> Result<()> {
    let mut kv = load_config(config)?;
    if let Some(c) = &overrides.corpus {
        kv.set("corpus", c.display());
    }
    if let Some(s) = overrides.seed {
        kv.set("seed", s);
    }
    if let Some(p) = overrides.p_enh {
        kv.set("p_enh", p);
    }
    if let Some(d) = overrides.delay_steps {
        kv.set("delay_steps", d);
    }
    let corpus = PathBuf::from(
        kv.get_str("corpus")
            .context("no corpus directory: set the `corpus` key or pass --corpus")?,
    );
    let frontend = FrontendConfig::from_kv(&kv)?;
    let enhancer = EnhanceConfig::from_kv(&kv)?;
    let train_cfg = TrainConfig::from_kv(&kv)?;

    let filterbank = Filterbank::new(frontend)?;
    let mut sample_rate = None;
    let mut dataset = Vec::new();
    for (clean_path, noisy_path) in read_manifest(&corpus)? {
        let noisy = match sample_rate {
            Some(sr) => read_wav_at(&noisy_path, sr),
            None => read_wav(&noisy_path),
        }
        .with_context(|| format!("reading {}", noisy_path.display()))?;
        sample_rate = Some(noisy.sample_rate());
        let clean = read_wav_at(&clean_path, noisy.sample_rate())
            .with_context(|| format!("reading {}", clean_path.display()))?;
        let q = filterbank.analyze(&noisy)?;
        let c = filterbank.analyze(&clean)?;
        let e = enhance(&q, Some(&c), enhancer.mode, enhancer.strength)?;
        dataset.push((q, e));
    }
    let sample_rate = sample_rate.expect("manifest is non-empty");

    let (stack, log) = train_stack(&dataset, &train_cfg)?;
    let model = CodecModel::new(sample_rate, frontend, stack)?;

    create_dir(out)?;
    model.save(&out.join("model.bin"))?;
    fs::write(out.join("train_log.jsonl"), log.to_json_lines())?;
    let mut echo = KvConfig::default();
    echo.set("corpus", corpus.display());
    frontend.write_kv(&mut echo);
    enhancer.write_kv(&mut echo);
    train_cfg.write_kv(&mut echo);
    fs::write(out.join(CONFIG_ECHO), echo.render())?;

    let (head, tail) = log.loss_head_tail(0.1);
    println!("steps = {}", log.steps.len());
    println!("anchor_fraction = {:.4}", log.anchor_fraction());
    println!("commitment_loss_first_10pct = {head:.6e}");
    println!("commitment_loss_last_10pct = {tail:.6e}");
    Ok(())
}

fn geometry(model: &CodecModel) -> Result<StreamGeometry> {
    let codebook_size = model
        .stack
        .uniform_size()
        .context("model stages have different codebook sizes")?;
    Ok(StreamGeometry {
        sample_rate: model.sample_rate,
        hop: model.frontend.hop,
        dim: model.frontend.dim,
        stages: model.stack.num_stages(),
        codebook_size,
    })
}

fn load_model(path: &Path) -> Result<CodecModel> {
    CodecModel::load(path).with_context(|| format!("loading model {}", path.display()))
}

fn load_packet(path: &Path) -> Result<(PacketHeader, Vec<Vec<u32>>)> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    bitstream::unpack(&bytes).with_context(|| format!("parsing packet {}", path.display()))
}

fn check_packet(header: &PacketHeader, model: &CodecModel) -> Result<()> {
    let expected = geometry(model)?;
    if header.geometry != expected {
        bail!(
            "packet geometry {:?} does not match model geometry {:?}",
            header.geometry,
            expected
        );
    }
    Ok(())
}

pub fn encode(
    model_path: &Path,
    input: &Path,
    streams: Option<usize>,
    enhance_ref: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let model = load_model(model_path)?;
    let geometry = geometry(&model)?;
    let filterbank = Filterbank::new(model.frontend)?;
    let wave = read_wav_at(input, model.sample_rate)
        .with_context(|| format!("reading {}", input.display()))?;
    let q = filterbank.analyze(&wave)?;
    let streams = streams.unwrap_or(geometry.stages);
    let result = match enhance_ref {
        Some(path) => {
            let reference = read_wav_at(path, model.sample_rate)
                .with_context(|| format!("reading {}", path.display()))?;
            let e = filterbank.analyze(&reference)?;
            quantize_pure(&q, &e, &model.stack, streams)?
        }
        None => quantize(&q, &model.stack, streams)?,
    };
    let bytes = bitstream::pack(&result, &geometry)?;
    fs::write(out, &bytes).with_context(|| format!("writing {}", out.display()))?;
    println!("frames = {}", result.frames());
    println!("streams = {streams}");
    println!("bytes = {}", bytes.len());
    println!(
        "bitrate_bps = {}",
        bitstream::bitrate(
            geometry.sample_rate,
            geometry.hop,
            streams,
            geometry.codebook_size
        )
    );
    Ok(())
}

pub fn decode(model_path: &Path, input: &Path, out: &Path) -> Result<()> {
    let model = load_model(model_path)?;
    let (header, indices) = load_packet(input)?;
    check_packet(&header, &model)?;
    ensure!(header.n_frames > 0, "packet holds no frames");
    let emb = reconstruct(&indices, &model.stack, model.frontend.hop)?;
    let wave = Filterbank::new(model.frontend)?.synthesize(&emb, model.sample_rate)?;
    write_wav(out, &wave, WavFormat::Float32)
        .with_context(|| format!("writing {}", out.display()))?;
    println!("samples = {}", wave.len());
    Ok(())
}

fn is_packet(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "pure")
}

pub fn analyze(inputs: &[PathBuf]) -> Result<()> {
    let cfg = PEConfig::default();
    let mut waves = Vec::new();
    for path in inputs {
        if is_packet(path) {
            let (header, indices) = load_packet(path)?;
            println!("{}:", path.display());
            println!("  frames = {}", header.n_frames);
            println!("  streams = {}", header.streams_used);
            println!("  anchored = {}", header.anchored);
            println!("  bitrate_bps = {}", header.bitrate());
            for (l, row) in indices.iter().enumerate() {
                if row.is_empty() {
                    continue;
                }
                let h = code_entropy(row, header.geometry.codebook_size)?;
                println!("  stream {} entropy_bits = {h:.6}", l + 1);
            }
        } else {
            let wave = read_wav(path).with_context(|| format!("reading {}", path.display()))?;
            let report = perceptual_entropy(&wave, &cfg)?;
            println!("{}:", path.display());
            println!("  pe_bits_per_sample = {:.6}", report.pe_bits_per_sample);
            println!("  pe_bits_per_second = {:.3}", report.pe_bits_per_second);
            waves.push(wave);
        }
    }
    if let [noisy, enhanced] = waves.as_slice() {
        println!(
            "pe_reduction_percent = {:.4}",
            pe_reduction(noisy, enhanced, &cfg)?
        );
    }
    Ok(())
}

pub fn eval(
    reference: &Path,
    estimate: &Path,
    model_path: Option<&Path>,
    packet: Option<&Path>,
    out: Option<&Path>,
) -> Result<()> {
    let r = read_wav(reference).with_context(|| format!("reading {}", reference.display()))?;
    let e = read_wav_at(estimate, r.sample_rate())
        .with_context(|| format!("reading {}", estimate.display()))?;
    let mut report = EvalReport::new(sdr_db(r.samples(), e.samples())?);

    if let Some(path) = model_path {
        let model = load_model(path)?;
        let filterbank = Filterbank::new(model.frontend)?;
        let q_ref = filterbank.analyze(&r)?;
        report.embedding_mse = Some(embedding_mse(&q_ref, &filterbank.analyze(&e)?)?);
        if let Some(packet) = packet {
            let (header, indices) = load_packet(packet)?;
            check_packet(&header, &model)?;
            for l in 1..=indices.len() {
                let partial = reconstruct(&indices[..l], &model.stack, model.frontend.hop)?;
                report
                    .residual_energy
                    .push(embedding_mse(&q_ref, &partial)?);
            }
            report.bitrate_bps = Some(header.bitrate());
            for row in &indices {
                report
                    .code_entropy
                    .push(code_entropy(row, header.geometry.codebook_size)?);
            }
        }
    } else if packet.is_some() {
        bail!("--packet needs --model");
    }

    let json = serde_json::to_string_pretty(&report)?;
    println!("{json}");
    if let Some(out) = out {
        fs::write(out, json + "\n").with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(())
}
