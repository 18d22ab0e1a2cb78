use asqg_core::autodiff::SeedRng;
use asqg_core::model::{Ablation, Model};
use asqg_core::synth::toy_corpus;
use asqg_core::text::{read_embeddings, PreprocessOptions};
use asqg_core::train::{filter_lengths, prepare, train, Checkpoint, CheckpointKind, TrainConfig};
use asqg_core::Error;

fn small_config() -> TrainConfig {
    TrainConfig {
        lr: 0.01,
        batch_size: 8,
        max_epochs: 2,
        p_drop: 0.2,
        emb_dim: 8,
        d_enc: 6,
        d_dec: 6,
        d_att: 5,
        d_q: 5,
        seed: 3,
        ..TrainConfig::default()
    }
}

fn checkpoint_bytes(ck: &Checkpoint) -> Vec<u8> {
    let mut buf = Vec::new();
    ck.write(&mut buf).unwrap();
    buf
}

fn run(cfg: &TrainConfig) -> (Vec<u8>, String) {
    let (vocab, _, ids) =
        prepare(&toy_corpus(), PreprocessOptions::default(), cfg.vocab_cap).unwrap();
    let mut model =
        Model::random(cfg.model_config(vocab.len()), &mut SeedRng::new(cfg.seed)).unwrap();
    let out = train(cfg, &mut model, &ids[..24], &ids[24..], |_, _| Ok(())).unwrap();
    (checkpoint_bytes(&out.final_checkpoint), out.loss_csv())
}

#[test]
fn same_seed_same_bytes() {
    let cfg = small_config();
    let (a, csv_a) = run(&cfg);
    let (b, csv_b) = run(&cfg);
    assert_eq!(a, b);
    assert_eq!(csv_a, csv_b);
    let mut other = cfg.clone();
    other.seed = 4;
    assert_ne!(run(&other).0, a);
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let cfg = small_config();
    let (bytes, _) = run(&cfg);
    let ck = Checkpoint::read(&bytes[..]).unwrap();
    assert_eq!(checkpoint_bytes(&ck), bytes);
    assert!(ck.adam.is_some());
    assert_eq!(ck.config_hash, cfg.hash());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    ck.save(&path).unwrap();
    assert_eq!(Checkpoint::load(&path).unwrap(), ck);
}

#[test]
fn corrupt_checkpoints_are_rejected() {
    let (bytes, _) = run(&small_config());
    assert!(matches!(
        Checkpoint::read(&b"NOPE\n{}\n"[..]),
        Err(Error::Checkpoint(_))
    ));
    let truncated = &bytes[..bytes.len() - 16];
    assert!(Checkpoint::read(truncated).is_err());
}

#[test]
fn loss_log_has_one_row_per_step_and_dev_at_epoch_end() {
    let cfg = small_config();
    let (_, csv) = run(&cfg);
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "step,epoch,train_loss,dev_loss");
    // 24 examples in batches of 8, two epochs.
    assert_eq!(rows.len(), 1 + 6);
    assert!(rows[3].split(',').nth(3).is_some_and(|d| !d.is_empty()));
    assert!(rows[1].ends_with(','));
}

#[test]
fn frozen_rows_do_not_move() {
    let cfg = small_config();
    let (vocab, _, ids) =
        prepare(&toy_corpus(), PreprocessOptions::default(), cfg.vocab_cap).unwrap();
    let file = "paris 0.1 0.2 0.3 0.4 0.5 0.6 0.7 0.8\nfounded 1 1 1 1 1 1 1 1\n";
    let emb = read_embeddings(&vocab, file.as_bytes(), cfg.emb_dim, &mut SeedRng::new(0)).unwrap();
    let before = emb.matrix.clone();
    let mut model = Model::new(cfg.model_config(vocab.len()), emb, &mut SeedRng::new(1)).unwrap();
    train(&cfg, &mut model, &ids, &[], |_, _| Ok(())).unwrap();
    let after = &model.weights.embedding;
    for tok in ["paris", "founded"] {
        let r = vocab.id(tok);
        assert_eq!(after.row(r), before.row(r), "{tok}");
    }
    let moved = vocab.id("library");
    assert_ne!(after.row(moved), before.row(moved));
}

#[test]
fn non_finite_loss_stops_training() {
    let cfg = small_config();
    let (vocab, _, ids) =
        prepare(&toy_corpus(), PreprocessOptions::default(), cfg.vocab_cap).unwrap();
    let mut model = Model::random(cfg.model_config(vocab.len()), &mut SeedRng::new(1)).unwrap();
    model.weights.decoder.b.data_mut()[0] = f64::NAN;
    match train(&cfg, &mut model, &ids, &[], |_, _| Ok(())) {
        Err(Error::NonFiniteLoss { step, epoch, batch }) => {
            assert_eq!((step, epoch), (1, 1));
            assert_eq!(batch.len(), cfg.batch_size);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn best_checkpoint_tracks_dev_loss() {
    let mut cfg = small_config();
    cfg.max_epochs = 3;
    let (vocab, _, ids) =
        prepare(&toy_corpus(), PreprocessOptions::default(), cfg.vocab_cap).unwrap();
    let mut model = Model::random(cfg.model_config(vocab.len()), &mut SeedRng::new(1)).unwrap();
    let mut epochs = Vec::new();
    let mut bests = Vec::new();
    let out = train(&cfg, &mut model, &ids[..24], &ids[24..], |ck, kind| {
        match kind {
            CheckpointKind::Epoch(e) => epochs.push(e),
            CheckpointKind::Best => bests.push(ck.epoch),
        }
        Ok(())
    })
    .unwrap();
    assert_eq!(epochs, vec![1, 2, 3]);
    assert_eq!(bests.last(), Some(&out.best_epoch));
    let dev: Vec<f64> = out.log.iter().filter_map(|r| r.dev_loss).collect();
    let min = dev.iter().cloned().fold(f64::INFINITY, f64::min);
    assert_eq!(out.best_loss, min);
}

#[test]
fn step_budget_and_length_filter() {
    let mut cfg = small_config();
    cfg.max_steps = 2;
    cfg.max_epochs = 10;
    let (vocab, _, ids) =
        prepare(&toy_corpus(), PreprocessOptions::default(), cfg.vocab_cap).unwrap();
    let mut model = Model::random(cfg.model_config(vocab.len()), &mut SeedRng::new(1)).unwrap();
    let out = train(&cfg, &mut model, &ids, &[], |_, _| Ok(())).unwrap();
    assert_eq!(out.log.len(), 2);
    assert_eq!(out.final_checkpoint.step, 2);

    cfg.max_passage_len = 14;
    let (kept, dropped) = filter_lengths(ids.clone(), &cfg);
    assert_eq!(kept.len() + dropped, ids.len());
    assert!(kept.iter().all(|e| e.passage.len() <= 14));
}

#[test]
fn every_ablation_trains() {
    for ab in [
        Ablation::FULL,
        Ablation::NO_MASK,
        Ablation::NO_KEYWORD,
        Ablation::GENERIC_DECODER,
    ] {
        let mut cfg = small_config();
        cfg.ablation = ab;
        cfg.max_epochs = 1;
        let (_, csv) = run(&cfg);
        assert!(csv.lines().count() > 1);
    }
}
