//! Replays the fuzz corpus seeds through the same entry points on the stable
//! toolchain, so the seeds stay meaningful as the formats evolve.

use std::path::PathBuf;

use rswc::encoder::EncodingMatrix;
use rswc::harness::{DecodeRequest, ExperimentConfig};
use rswc::ip::{solve_count, IpInstance};
use rswc::nsn::{MultiPmf, NsnTopology};
use rswc::source_model::JointPmf;

fn seeds(target: &str) -> Vec<(String, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fuzz/corpus").join(target);
    let mut out: Vec<(String, String)> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read_to_string(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds in {}", dir.display());
    out
}

#[test]
fn pmf_seeds() {
    let ok: Vec<bool> = seeds("joint_pmf").iter().map(|(_, s)| JointPmf::from_json(s).is_ok()).collect();
    // dsbs, ternary, unsorted
    assert_eq!(ok, [true, true, false]);
}

#[test]
fn matrix_seeds() {
    for (name, s) in seeds("encoding_matrix") {
        assert!(EncodingMatrix::from_json(&s).is_ok(), "{name}");
    }
}

#[test]
fn ip_seeds() {
    let counts: Vec<usize> = seeds("ip_instance")
        .iter()
        .map(|(_, s)| solve_count(&IpInstance::from_json(s).unwrap(), 16, Some(10_000)).unwrap().solutions_found)
        .collect();
    // card: 3 choose 2; domains: (-1,0), (0,0) and (1,2); infeasible
    assert_eq!(counts, [3, 3, 0]);
}

#[test]
fn network_seeds() {
    for (name, s) in seeds("network") {
        let (t, p) = s.split_once('\0').unwrap();
        let topo = NsnTopology::from_json(t).unwrap();
        MultiPmf::from_json(p).unwrap();
        assert_eq!(topo.validate().is_empty(), name == "three_sources", "{name}");
    }
}

#[test]
fn config_and_request_seeds() {
    for (name, s) in seeds("experiment_config") {
        ExperimentConfig::from_json(&s).unwrap().validate().unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    for (name, s) in seeds("decode_request") {
        DecodeRequest::from_json(&s).unwrap().run().unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}
