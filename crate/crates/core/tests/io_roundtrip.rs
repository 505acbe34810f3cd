use coarse_kernels::fibred::{cycle_scale, fce_cycles, fce_large_girth};
use coarse_kernels::gluing::{proper_schedules, relayout};
use coarse_kernels::io::{
    load_box_space, load_fce, load_space, read_envelopes_csv, read_kernel_csv, save_fce, save_space,
    write_envelopes_csv, write_json, write_kernel_csv, BoxSpaceFile, ElementInput, GroupSpec,
};
use coarse_kernels::kernels::{control_envelopes, envelopes_of_kernel, schoenberg};
use coarse_kernels::metric_space::build_graph_space;
use coarse_kernels::{ControlFunctions, FibredEmbedding, Kernel, Metric};

#[test]
fn fce_json_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let (_, fce) = fce_cycles(&[8, 16]).unwrap();
    let path = dir.path().join("fce.json");
    save_fce(&path, &fce).unwrap();
    let back: FibredEmbedding<i64> = load_fce(&path).unwrap();
    assert_eq!(back, fce);

    let edges: Vec<(usize, usize)> = (1..15).map(|v| ((v - 1) / 2, v)).collect();
    let (_, tree) = fce_large_girth(vec![build_graph_space(15, &edges).unwrap()], None).unwrap();
    let irrational = tree.map(|v| v as f64 / 3.0 + std::f64::consts::PI.sqrt());
    save_fce(&path, &irrational).unwrap();
    let back: FibredEmbedding<f64> = load_fce(&path).unwrap();
    assert_eq!(back, irrational);
}

#[test]
fn laid_out_space_round_trips_with_huge_offsets() {
    let dir = tempfile::tempdir().unwrap();
    let lengths = [8usize, 16, 32, 64, 128];
    let (bs, _) = fce_cycles(&lengths).unwrap();
    let scales: Vec<u64> = lengths.iter().map(|&n| cycle_scale(n)).collect();
    let u = relayout(bs.union(), &scales, &proper_schedules(4, &ControlFunctions::linear()).unwrap()).unwrap();
    assert!(*u.offsets().last().unwrap() > u64::MAX as u128 / 1_000_000);
    let path = dir.path().join("space.json");
    save_space(&path, &u).unwrap();
    let back = load_space(&path).unwrap();
    assert_eq!(back.offsets(), u.offsets());
    for (x, y) in [(0, 5), (3, 200), (100, 247), (40, 40)] {
        assert_eq!(back.dist(x, y), u.dist(x, y));
    }
}

#[test]
fn kernel_csv_round_trip() {
    let g = build_graph_space(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)]).unwrap();
    let all: Vec<usize> = (0..6).collect();
    let k = Kernel::from_fn(6, &all, |x, y| g.dist(x, y).unwrap() as f64).unwrap();
    let f = schoenberg(&k, 0.3).unwrap();
    let mut buf = Vec::new();
    write_kernel_csv(&f, &mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("x,y,value\n"));
    let back: Kernel<f64> = read_kernel_csv(6, buf.as_slice()).unwrap();
    assert_eq!(back, f);

    let exact = k.map(|v| v as i64);
    let mut buf = Vec::new();
    write_kernel_csv(&exact, &mut buf).unwrap();
    assert_eq!(read_kernel_csv::<i64, _>(6, buf.as_slice()).unwrap(), exact);
    assert!(read_kernel_csv::<f64, _>(6, "x,y,value\n0,1,abc\n".as_bytes()).is_err());

    let env = envelopes_of_kernel(&g, &k).unwrap();
    let mut buf = Vec::new();
    write_envelopes_csv(&env, &mut buf).unwrap();
    assert!(String::from_utf8(buf.clone()).unwrap().starts_with("r,rho_minus,rho_plus\n"));
    assert_eq!(read_envelopes_csv(buf.as_slice()).unwrap(), env);
    let direct = control_envelopes(&[(1, 0.5), (2, 2.0)]).unwrap();
    let mut buf = Vec::new();
    write_envelopes_csv(&direct, &mut buf).unwrap();
    assert_eq!(read_envelopes_csv(buf.as_slice()).unwrap(), direct);
}

#[test]
fn box_space_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("box.json");
    let file = BoxSpaceFile {
        quotients: vec![GroupSpec::Sl2 { p: 3 }, GroupSpec::Sl2 { p: 5 }],
        generators: vec![
            ElementInput::Label("[[1,1],[0,1]]".into()),
            ElementInput::Label("[[1,0],[1,1]]".into()),
        ],
    };
    write_json(&path, &file).unwrap();
    let bs = load_box_space(&path).unwrap();
    assert_eq!(bs.union().component(0).n(), 24);
    assert_eq!(bs.union().component(1).n(), 120);

    std::fs::write(&path, r#"{"quotients":[{"kind":"cyclic","n":3}],"generators":["2"]}"#).unwrap();
    assert_eq!(load_box_space(&path).unwrap().union().len(), 3);
    std::fs::write(&path, r#"{"quotients":[{"kind":"nope"}]}"#).unwrap();
    assert!(load_box_space(&path).is_err());
}
