use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use spectral_impute::prune::ConvKernel;
use spectral_impute::tensor_io::{read_tensors, write_tensors, NamedTensor};
use spectral_impute::DenseMatrix;
use tempfile::TempDir;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spectral-impute")).args(args).output().unwrap()
}

fn ok_json(args: &[&str]) -> serde_json::Value {
    let out = cli(args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    assert_eq!(cli(&["--help"]).status.code(), Some(0));
    assert_eq!(cli(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(cli(&["run"]).status.code(), Some(1));
    assert_eq!(cli(&["run", "--config", "/no/such.toml"]).status.code(), Some(1));
    let bad = write(dir.path(), "bad.toml", "method = \"lsi\"\n[data]\nkind = \"nope\"\n");
    assert_eq!(cli(&["run", "--config", &bad]).status.code(), Some(1));
    let missing = write(
        dir.path(),
        "missing.toml",
        "features = \"/no/features.txt\"\nembeddings = \"/no/emb.txt\"\noutput = \"/tmp/x\"\n",
    );
    assert_eq!(cli(&["impute", "--config", &missing]).status.code(), Some(2));
    let good = write(dir.path(), "c3.toml", "method = \"lsi\"\n[data]\nkind = \"chain3\"\n");
    assert_eq!(cli(&["run", "--config", &good, "--set", "seeds.splits=0"]).status.code(), Some(1));
    assert_eq!(cli(&["run", "--config", &good, "--set", "seeds.splits=1"]).status.code(), Some(0));
}

#[test]
fn fixture_graph_impute_eval_pipeline() {
    let dir = TempDir::new().unwrap();
    let d = dir.path().join("tc");
    let d_str = d.display().to_string();
    ok_json(&["gen-fixture", "--kind", "two-cluster", "--n", "150", "--known", "30", "--seed", "2", "--out", &d_str]);
    let features = d.join("features.txt").display().to_string();
    let embeddings = d.join("embeddings.txt").display().to_string();

    let graph_cfg = write(
        dir.path(),
        "g.toml",
        &format!(
            "features = \"{features}\"\nknown = \"{embeddings}\"\noutput = \"{}\"\n[graph]\nkind = \"anchor_knn\"\ndelta = 4\nm = 10\n",
            d.join("edges.txt").display()
        ),
    );
    let g = ok_json(&["build-graph", "--config", &graph_cfg]);
    assert_eq!(g["nodes"], 150);
    assert_eq!(g["every_component_labeled"], true);

    let imputed = d.join("imputed.txt").display().to_string();
    let imp_cfg = write(
        dir.path(),
        "i.toml",
        &format!(
            "features = \"{features}\"\nembeddings = \"{embeddings}\"\nedges = \"{}\"\noutput = \"{imputed}\"\neta = 1e-8\n",
            d.join("edges.txt").display()
        ),
    );
    let r = ok_json(&["impute", "--config", &imp_cfg]);
    assert_eq!((r["known"].as_u64(), r["imputed"].as_u64()), (Some(30), Some(120)));
    assert_eq!(r["diffusion"]["converged"], true);

    // Known rows pass through unchanged.
    let known = fs::read_to_string(&embeddings).unwrap();
    let out = fs::read_to_string(&imputed).unwrap();
    for line in known.lines().skip(1) {
        assert!(out.lines().any(|l| l == line), "{line}");
    }

    let eval_cfg = write(
        dir.path(),
        "e.toml",
        &format!("embeddings = \"{imputed}\"\n[metric]\nkind = \"mse\"\ntruth = \"{}\"\n", d.join("truth.txt").display()),
    );
    let e = ok_json(&["eval", "--config", &eval_cfg]);
    assert_eq!(e["kind"], "mse");
    assert!(e["mean"].as_f64().unwrap() < 0.5);
    let knn_cfg = write(
        dir.path(),
        "k.toml",
        &format!("embeddings = \"{imputed}\"\n[metric]\nkind = \"knn\"\nk = 5\nlabels = \"{}\"\n", d.join("labels.txt").display()),
    );
    assert!(ok_json(&["eval", "--config", &knn_cfg])["mean"].as_f64().unwrap() > 0.9);
}

#[test]
fn train_writes_loadable_checkpoint() {
    let dir = TempDir::new().unwrap();
    let d = dir.path().join("sbm");
    ok_json(&["gen-fixture", "--kind", "sbm", "--n", "120", "--out", &d.display().to_string()]);
    let ckpt = dir.path().join("model.txt");
    let cfg = write(
        dir.path(),
        "t.json",
        &serde_json::json!({
            "data": {"kind": "graph", "features": d.join("features.txt"), "labels": d.join("labels.txt"), "edges": d.join("edges.txt")},
            "method": "gcn",
            "eiglearn": true,
            "split": {"per_class": 10, "validation": 20, "test": 40},
            "hyper": {"schedule": {"stage1": {"epochs": 20, "learning_rate": 0.05, "weight_decay": 0.0},
                                   "stage2": {"epochs": 5, "learning_rate": 0.01, "weight_decay": 0.0}, "k": 4}},
            "checkpoint": ckpt
        })
        .to_string(),
    );
    let r = ok_json(&["train", "--config", &cfg, "--set", "init_seed=3"]);
    assert!(r["metrics"]["test_accuracy"].as_f64().is_some());
    assert_eq!(r["train_report"]["stage2_losses"].as_array().unwrap().len(), 5);
    let tensors = read_tensors(fs::read(&ckpt).unwrap().as_slice()).unwrap();
    let names: Vec<&str> = tensors.iter().map(|t| t.name.as_str()).collect();
    assert_eq!(names, ["layer0.w0", "layer0.b", "layer1.w0", "layer1.b", "delta", "basis.values", "basis.vectors"]);
}

#[test]
fn prune_matrices_and_kernels() {
    let dir = TempDir::new().unwrap();
    let w = DenseMatrix::from_fn(6, 5, |i, j| ((i * 5 + j) as f64 - 14.5) / 3.0);
    let k = ConvKernel::half_padded(4, 2, 3, (0..72).map(|v| (v as f64 * 0.37).sin()).collect()).unwrap();
    let input = dir.path().join("w.txt");
    let mut buf = Vec::new();
    write_tensors(&mut buf, &[NamedTensor::matrix("fc", &w), NamedTensor::row("bias", &[1.0, 2.0]), NamedTensor::kernel("conv", &k)])
        .unwrap();
    fs::write(&input, buf).unwrap();
    let output = dir.path().join("out.txt");
    let run = |method: &str| {
        let cfg = write(
            dir.path(),
            "p.toml",
            &format!("input = \"{}\"\noutput = \"{}\"\n{method}", input.display(), output.display()),
        );
        let r = ok_json(&["prune", "--config", &cfg]);
        (r, read_tensors(fs::read(&output).unwrap().as_slice()).unwrap())
    };

    let (r, t) = run("[method]\nkind = \"threshold\"\nkeep_fraction = 0.2\n");
    let names: Vec<&str> = r.as_array().unwrap().iter().map(|x| x["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["fc", "conv"], "row vectors are left alone");
    assert_eq!(t[0].values.iter().filter(|v| **v != 0.0).count(), 6);
    assert_eq!(t[1].values, vec![1.0, 2.0]);
    assert_eq!(t[2].values.iter().filter(|v| **v != 0.0).count(), 15);

    let (r, t) = run("tensors = [\"conv\"]\n[method]\nkind = \"channel\"\ndrop_fraction = 0.5\n");
    assert_eq!(r[0]["kept_count"], 2);
    assert_eq!(t[0].values, w.as_slice());
    assert_eq!(t[2].values.chunks(18).filter(|c| c.iter().all(|v| *v == 0.0)).count(), 2);

    let (r, _) = run("[method]\nkind = \"sparsify\"\nc = 0.5\nq = 0.5\nsvd_rank = 2\nseed = 1\n");
    assert!(r[0]["sparsity"].as_f64().unwrap() > 0.0);

    let cfg = write(dir.path(), "bad.toml", &format!("input = \"{}\"\noutput = \"{}\"\ntensors = [\"nope\"]\n[method]\nkind = \"threshold\"\nkeep_fraction = 0.5\n", input.display(), output.display()));
    assert_eq!(cli(&["prune", "--config", &cfg]).status.code(), Some(2));
}
