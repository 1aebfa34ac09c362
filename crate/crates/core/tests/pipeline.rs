use alignnet::distortion::DistortionConfig;
use alignnet::frontend::{log_mel_raw, onset_envelope, Layout, LogMelConfig};
use alignnet::metrics::{summarize, AlignmentReport};
use alignnet::model::{Ablation, AlignNet, AlignNetConfig};
use alignnet::pipeline::data::{
    load_dataset, write_synthetic_dataset, Clip, EvalCase, AUDIO_PER_VIDEO,
};
use alignnet::pipeline::eval::{evaluate_dtw, evaluate_identity, format_table, TableRow};
use alignnet::pipeline::export::{align_files, dtw_files, export_attention};
use alignnet::pipeline::synth::{synth_pair, SynthConfig};
use alignnet::pipeline::train::{train, TrainConfig, BEST_DIR, METRICS_FILE, TRAIN_CONFIG_FILE};
use alignnet::Error;

fn clips(seeds: std::ops::Range<u64>) -> Vec<Clip> {
    seeds
        .map(|s| Clip::synthetic(s, &SynthConfig::default()).unwrap())
        .collect()
}

fn cases(seeds: std::ops::Range<u64>) -> Vec<EvalCase> {
    seeds
        .map(|s| {
            let clip = Clip::synthetic(500 + s, &SynthConfig::default()).unwrap();
            EvalCase::new(clip, &DistortionConfig::default(), s).unwrap()
        })
        .collect()
}

#[test]
fn synthesis_is_deterministic() {
    let cfg = SynthConfig::default();
    let a = synth_pair(11, &cfg).unwrap();
    assert_eq!(a, synth_pair(11, &cfg).unwrap());
    assert_ne!(a.audio, synth_pair(12, &cfg).unwrap().audio);
    assert_eq!(a.keypoints.num_frames(), 121);
    assert_eq!(a.audio.len(), 64_001);
    assert!(a.beats.len() >= 4);
}

#[test]
fn silent_config_is_still() {
    let pair = synth_pair(3, &SynthConfig::silent()).unwrap();
    assert!(pair.beats.is_empty());
    assert!(pair.audio.iter().all(|&s| s == 0.0));
    let k = pair.keypoints.num_keypoints();
    let first: Vec<[f64; 2]> = (0..k).map(|j| pair.keypoints.point(0, j)).collect();
    for i in 1..pair.keypoints.num_frames() {
        for (j, p) in first.iter().enumerate() {
            assert_eq!(pair.keypoints.point(i, j), *p);
        }
    }
}

#[test]
fn beats_line_up_with_audio_onsets() {
    let cfg = SynthConfig::default();
    for seed in 0..5 {
        let pair = synth_pair(seed, &cfg).unwrap();
        let hop = 1.0 / (AUDIO_PER_VIDEO as f64 * cfg.fps);
        let env = onset_envelope(
            &log_mel_raw(&pair.audio, &LogMelConfig::new(cfg.sample_rate as f64, hop)).unwrap(),
        );
        for &b in &pair.beats {
            let j = (b / hop).round() as usize;
            let (lo, hi) = (j.saturating_sub(6), (j + 7).min(env.len()));
            let peak = (lo..hi).max_by(|&x, &y| env[x].total_cmp(&env[y])).unwrap();
            // One video frame is three audio frames.
            assert!(
                peak.abs_diff(j) <= AUDIO_PER_VIDEO,
                "seed {seed} beat {b}: onset at {peak}, beat at {j}"
            );
        }
    }
}

#[test]
fn motion_reverses_at_beat_frames() {
    let cfg = SynthConfig {
        sway: 0.0,
        ..SynthConfig::default()
    };
    let pair = synth_pair(5, &cfg).unwrap();
    let x = |i: usize| pair.keypoints.point(i, 0)[0] + pair.keypoints.point(i, 0)[1];
    // Keypoints rest until the first beat.
    for f in pair.beat_frames().into_iter().skip(1) {
        if f < 2 || f + 1 >= pair.keypoints.num_frames() {
            continue;
        }
        let before = x(f - 1) - x(f - 2);
        let after = x(f + 1) - x(f);
        assert!(before * after < 0.0, "no reversal at frame {f}");
    }
}

#[test]
fn zero_epochs_keep_the_initialisation() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = TrainConfig::new(AlignNetConfig::new(Layout::Pose19));
    cfg.epochs = 0;
    cfg.seed = 9;
    let out = train(&cfg, &clips(0..2), &cases(0..2), Some(dir.path()), |_| {}).unwrap();
    let init = AlignNet::new(cfg.model.clone(), 9).unwrap();
    assert_eq!(out.best.params(), init.params());
    assert_eq!(out.best_epoch, 0);
    assert_eq!(out.log.len(), 1);
    assert!(out.log[0].val_afe.is_some());
    let saved = AlignNet::load(&dir.path().join(BEST_DIR)).unwrap();
    assert_eq!(saved.params(), init.params());
    assert!(dir.path().join(TRAIN_CONFIG_FILE).is_file());
    let metrics = std::fs::read_to_string(dir.path().join(METRICS_FILE)).unwrap();
    assert_eq!(metrics.lines().count(), 1);
}

#[test]
fn fixed_seed_reproduces_training() {
    let mut cfg = TrainConfig::new(AlignNetConfig::new(Layout::Pose19));
    cfg.epochs = 1;
    cfg.batch_size = 2;
    cfg.seed = 4;
    let data = clips(0..4);
    let val = cases(0..2);
    let a = train(&cfg, &data, &val, None, |_| {}).unwrap();
    let b = train(&cfg, &data, &val, None, |_| {}).unwrap();
    assert_eq!(a.log, b.log);
    assert_eq!(a.best.params(), b.best.params());
    assert_eq!(a.log[1].steps, 2);
    assert!(a.log[1].train_loss.unwrap().is_finite());
}

#[test]
fn training_rejects_bad_configs() {
    let mut cfg = TrainConfig::new(AlignNetConfig::new(Layout::Pose19));
    cfg.batch_size = 0;
    assert!(matches!(
        train(&cfg, &clips(0..1), &[], None, |_| {}),
        Err(Error::Config(_))
    ));
    let cfg = TrainConfig::new(AlignNetConfig::new(Layout::Pose19));
    assert!(matches!(
        train(&cfg, &[], &[], None, |_| {}),
        Err(Error::Config(_))
    ));
}

#[test]
fn ground_truth_scores_perfectly() {
    for case in cases(0..3) {
        let s = case.sample(&AlignNetConfig::new(Layout::Pose19)).unwrap();
        let m = s.audio.cols();
        let r = AlignmentReport::score("gt", &s.gt.values, &s.gt.values, m, 30.0, 3.0).unwrap();
        assert_eq!(r.afe_frames, 0.0);
        assert_eq!(r.itu_accuracy_pct, 100.0);
    }
}

#[test]
fn baselines_score_and_tabulate() {
    let test = cases(0..4);
    let id = evaluate_identity(&test).unwrap();
    let dtw = evaluate_dtw(&test).unwrap();
    assert_eq!(id.len(), 4);
    let (afe_id, _) = summarize(&id);
    let (afe_dtw, _) = summarize(&dtw);
    assert!(afe_id > 0.0 && afe_dtw > 0.0);
    let table = format_table(&[
        TableRow::from_reports("identity", &id),
        TableRow::from_reports("dtw", &dtw),
    ]);
    assert_eq!(table.lines().count(), 4);
    assert!(table.contains("| identity"));
}

#[test]
fn dataset_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_synthetic_dataset(
        dir.path(),
        &SynthConfig::default(),
        &DistortionConfig::default(),
        2,
        1,
        3,
    )
    .unwrap();
    assert_eq!((m.train.len(), m.test.len()), (2, 1));
    let (train, test) = load_dataset(dir.path()).unwrap();
    assert_eq!(train.len(), 2);
    assert_eq!(test.len(), 1);
    assert_eq!(train[0].num_frames(), 121);
    assert_eq!(train[0].mel.n_frames(), 361);
    assert_eq!(test[0].clip.beats, m.test[0].beats);
    let (again, test_again) = load_dataset(dir.path()).unwrap();
    assert_eq!(again, train);
    assert_eq!(test_again[0].warp, test[0].warp);
}

#[test]
fn alignment_csv_has_one_row_per_frame() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_synthetic_dataset(
        dir.path(),
        &SynthConfig::default(),
        &DistortionConfig::default(),
        1,
        0,
        1,
    )
    .unwrap();
    let kps = dir.path().join(&m.train[0].keypoints);
    let wav = dir.path().join(&m.train[0].audio);
    let model = AlignNet::new(AlignNetConfig::new(Layout::Pose19), 2).unwrap();
    let out = dir.path().join("a.csv");
    let corr = align_files(&model, &kps, &wav, &out, false).unwrap();
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(corr.len(), 121);
    assert_eq!(text.lines().count(), 122);
    assert_eq!(
        text.lines().next().unwrap(),
        "frame_index,normalized_value,audio_frame,time_seconds"
    );
    align_files(&model, &kps, &wav, &out, false).unwrap();
    assert_eq!(std::fs::read_to_string(&out).unwrap(), text);
    // The untrained model maps every frame to the middle of the audio.
    let last: Vec<&str> = text.lines().last().unwrap().split(',').collect();
    assert_eq!(last[0], "120");
    assert!((last[2].parse::<f64>().unwrap() - 180.0).abs() < 1e-9);

    let dtw_out = dir.path().join("d.csv");
    let dtw = dtw_files(&kps, &wav, &dtw_out, true).unwrap();
    assert_eq!(dtw.len(), 121);
    assert!(dtw.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn attention_export_masses() {
    let model = AlignNet::new(AlignNetConfig::new(Layout::Pose19), 0).unwrap();
    let silent = vec![0.0; 16_000];
    let e = export_attention(&model, Some((&silent, 16_000.0)), 30.0).unwrap();
    let classes = e.keypoint.as_ref().unwrap();
    let total: f64 = classes.iter().map(|c| c.mass).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert_eq!(classes.iter().map(|c| c.keypoints.len()).sum::<usize>(), 19);
    let t = e.temporal.as_ref().unwrap();
    assert!(t.onset_envelope.iter().all(|&v| v == 0.0));
    assert_eq!(t.gates.len(), t.onset_envelope.len());
    // Zero-initialised gate output: sigmoid(0).
    assert!(t.gates.iter().all(|&g| (g - 0.5).abs() < 1e-12));
    assert_eq!(e.temporal_csv().unwrap().lines().count(), t.gates.len() + 1);
}

#[test]
fn attention_export_needs_attention() {
    let base = AlignNet::new(
        AlignNetConfig::new(Layout::Pose19).with_ablation(Ablation::BASE),
        0,
    )
    .unwrap();
    assert!(matches!(
        export_attention(&base, None, 30.0),
        Err(Error::Config(_))
    ));
    let ka_only: Ablation = "FP,MI,KA".parse().unwrap();
    let model = AlignNet::new(
        AlignNetConfig::new(Layout::Pose19).with_ablation(ka_only),
        0,
    )
    .unwrap();
    assert!(export_attention(&model, None, 30.0)
        .unwrap()
        .temporal
        .is_none());
    assert!(export_attention(&model, Some((&[0.0; 100], 16_000.0)), 30.0).is_err());
}
