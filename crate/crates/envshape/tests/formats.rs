use envshape::formats::{from_json, to_json, DatasetFile, EnvelopeFile, MdpFile, SolutionFile};
use envshape_core::rng::{stream, OFFLINE_DATA, OFFLINE_SPLIT};
use envshape_core::{
    collect_dataset, compute_envelopes, generate_mdp, solve_optimal, LayeredMdp, MdpGenSpec,
    OfflineConfig, StochasticPolicy, ValueEnvelope,
};

fn model(seed: u64) -> (MdpGenSpec, LayeredMdp) {
    let spec = MdpGenSpec {
        seed,
        concentration: 0.3,
        ..Default::default()
    };
    let mdp = generate_mdp(&spec).unwrap();
    (spec, mdp)
}

fn learned(mdp: &LayeredMdp, k: usize) -> ValueEnvelope {
    let data = collect_dataset(
        mdp,
        &StochasticPolicy::uniform(mdp.shape()),
        "uniform",
        k,
        &mut stream(1, OFFLINE_DATA, 0),
    )
    .unwrap();
    compute_envelopes(
        &data,
        mdp,
        &OfflineConfig::new(0.1).unwrap(),
        &mut stream(1, OFFLINE_SPLIT, 0),
    )
    .unwrap()
}

#[test]
fn mdp_round_trip_is_exact() {
    for seed in 0..5 {
        let (spec, mdp) = model(seed);
        let text = to_json(&MdpFile::new(&mdp, Some(&spec))).unwrap();
        let back = from_json::<MdpFile>(&text).unwrap();
        assert_eq!(back.to_mdp().unwrap(), mdp);
        assert_eq!(back.generator.unwrap().to_spec().unwrap(), spec);
    }
}

#[test]
fn envelope_round_trip_and_recomputed_derivatives() {
    let (_, mdp) = model(2);
    let env = learned(&mdp, 900);
    let text = to_json(&EnvelopeFile::new(&env)).unwrap();
    assert_eq!(
        from_json::<EnvelopeFile>(&text)
            .unwrap()
            .to_envelope()
            .unwrap(),
        env
    );

    // derived fields in the file are ignored: doctor them and reload
    let mut file = EnvelopeFile::new(&env);
    file.d_max = -1.0;
    file.width.clear();
    file.ranges = vec![0.0; 4];
    let back = file.to_envelope().unwrap();
    assert_eq!(back.d_max(), env.d_max());
    assert_eq!(back.ranges(), env.ranges());
    assert_eq!(back.width(), env.width());
}

#[test]
fn envelope_serialization_is_deterministic() {
    let (_, mdp) = model(3);
    let a = to_json(&EnvelopeFile::new(&learned(&mdp, 600))).unwrap();
    let b = to_json(&EnvelopeFile::new(&learned(&mdp, 600))).unwrap();
    assert_eq!(a, b);
}

#[test]
fn dataset_round_trip_and_shape_check() {
    let (_, mdp) = model(4);
    let data = collect_dataset(
        &mdp,
        &StochasticPolicy::uniform(mdp.shape()),
        "uniform",
        25,
        &mut stream(4, OFFLINE_DATA, 0),
    )
    .unwrap();
    let file = from_json::<DatasetFile>(&to_json(&DatasetFile::new(&data, 4)).unwrap()).unwrap();
    assert_eq!(file.to_dataset(mdp.shape()).unwrap(), data);

    let mut bad = file.clone();
    bad.trajectories[3][2].0 = 7;
    assert!(bad.to_dataset(mdp.shape()).is_err());
    let short = generate_mdp(&MdpGenSpec {
        horizon: 3,
        ..Default::default()
    })
    .unwrap();
    assert!(file.to_dataset(short.shape()).is_err());
}

#[test]
fn solution_round_trip() {
    let (_, mdp) = model(5);
    let sol = solve_optimal(&mdp);
    let text = to_json(&SolutionFile::new(mdp.shape(), &sol)).unwrap();
    let (shape, back) = from_json::<SolutionFile>(&text)
        .unwrap()
        .to_solution()
        .unwrap();
    assert_eq!(&shape, mdp.shape());
    assert_eq!(back, sol);
}

#[test]
fn rejects_wrong_header_and_broken_rows() {
    let (_, mdp) = model(6);
    let text = to_json(&MdpFile::new(&mdp, None)).unwrap();
    assert!(from_json::<EnvelopeFile>(&text).is_err());
    let newer = text.replace("\"schema_version\": 1", "\"schema_version\": 2");
    assert!(from_json::<MdpFile>(&newer).is_err());

    let mut file = MdpFile::new(&mdp, None);
    file.transitions[1][0] += 1e-9;
    assert!(file.to_mdp().is_err());
    let mut file = MdpFile::new(&mdp, None);
    file.rewards[0][0] = 1.5;
    assert!(file.to_mdp().is_err());
}
