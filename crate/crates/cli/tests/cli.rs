use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hrpiano::midi::{parse_midi, write_midi};
use hrpiano::{grid_io, NoteEvent, NoteSequence, PedalEvent};
use tempfile::TempDir;

fn hrpiano(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hrpiano")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_seq(dir: &TempDir, name: &str, seq: &NoteSequence) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, write_midi(seq, 480, 120.0).unwrap()).unwrap();
    path
}

fn ten_second_piece() -> NoteSequence {
    let notes = vec![
        NoteEvent::new(60, 0.5, 1.0, 80).unwrap(),
        NoteEvent::new(64, 1.25, 2.0, 64).unwrap(),
        NoteEvent::new(67, 3.0, 4.5, 100).unwrap(),
        NoteEvent::new(60, 5.0, 5.5, 30).unwrap(),
        NoteEvent::new(72, 9.0, 9.9, 120).unwrap(),
    ];
    let pedals = vec![PedalEvent::new(0.4, 2.2).unwrap(), PedalEvent::new(4.0, 6.0).unwrap()];
    NoteSequence::new(notes, pedals, 10.0).unwrap()
}

#[test]
fn encode_ten_seconds_gives_1001_frames() {
    let dir = TempDir::new().unwrap();
    let midi = write_seq(&dir, "in.mid", &ten_second_piece());
    let out = dir.path().join("grids");
    let res = hrpiano(&["encode", s(&midi), "--out", s(&out)]);
    assert!(res.status.success(), "{}", stderr(&res));
    assert!(stdout(&res).contains("1001 x 88"), "{}", stdout(&res));
    let bundle = grid_io::read_note_bundle(&out).unwrap();
    assert_eq!(bundle.grid().num_frames(), 1001);
    assert!(grid_io::read_pedal_bundle(&out).unwrap().is_some());
}

#[test]
fn encode_empty_midi_gives_zero_grids() {
    let dir = TempDir::new().unwrap();
    let midi = write_seq(&dir, "empty.mid", &NoteSequence::empty());
    let out = dir.path().join("grids");
    let res = hrpiano(&["encode", s(&midi), "--out", s(&out)]);
    assert!(res.status.success(), "{}", stderr(&res));
    let bundle = grid_io::read_note_bundle(&out).unwrap();
    for g in [&bundle.frame, &bundle.onset_reg, &bundle.offset_reg, &bundle.velocity] {
        assert!(g.values().iter().all(|&v| v == 0.0));
    }
}

#[test]
fn encode_j_override_narrows_triangles() {
    let dir = TempDir::new().unwrap();
    let seq = NoteSequence::new(vec![NoteEvent::new(60, 1.003, 1.5, 80).unwrap()], vec![], 2.0).unwrap();
    let midi = write_seq(&dir, "in.mid", &seq);
    let out = dir.path().join("grids");
    assert!(hrpiano(&["encode", s(&midi), "--out", s(&out), "--j", "2"]).status.success());
    let bundle = grid_io::read_note_bundle(&out).unwrap();
    let nonzero = bundle.onset_reg.column(60 - 21).iter().filter(|&&v| v > 0.0).count();
    assert_eq!(nonzero, 4);
}

#[test]
fn decode_of_encode_matches_original() {
    let dir = TempDir::new().unwrap();
    let original = ten_second_piece();
    let midi = write_seq(&dir, "in.mid", &original);
    let grids = dir.path().join("grids");
    let decoded = dir.path().join("out.mid");
    assert!(hrpiano(&["encode", s(&midi), "--out", s(&grids)]).status.success());
    let res = hrpiano(&["decode", s(&grids), "--out", s(&decoded)]);
    assert!(res.status.success(), "{}", stderr(&res));
    let back = parse_midi(&std::fs::read(&decoded).unwrap()).unwrap();
    let reread = parse_midi(&std::fs::read(&midi).unwrap()).unwrap();
    assert_eq!(back.notes().len(), reread.notes().len());
    for (a, b) in back.notes().iter().zip(reread.notes()) {
        assert_eq!(a.pitch(), b.pitch());
        // one tick at 480 tpq and 120 BPM is about 1.04 ms
        assert!((a.onset_seconds() - b.onset_seconds()).abs() < 2.1e-3);
        assert!((a.offset_seconds() - b.offset_seconds()).abs() < 2.1e-3);
        assert!(a.velocity().abs_diff(b.velocity()) <= 1);
    }
    assert_eq!(back.pedals().len(), 2);

    let res = hrpiano(&["eval", s(&midi), s(&decoded)]);
    assert!(res.status.success());
    assert!(stdout(&res).lines().all(|l| l.ends_with("F1 100.00%")), "{}", stdout(&res));
}

#[test]
fn decode_with_high_threshold_succeeds() {
    let dir = TempDir::new().unwrap();
    let midi = write_seq(&dir, "in.mid", &ten_second_piece());
    let grids = dir.path().join("grids");
    let decoded = dir.path().join("out.mid");
    assert!(hrpiano(&["encode", s(&midi), "--out", s(&grids)]).status.success());
    let res = hrpiano(&["decode", s(&grids), "--out", s(&decoded), "--threshold", "0.99"]);
    assert!(res.status.success(), "{}", stderr(&res));
    assert!(decoded.exists());
}

#[test]
fn decode_names_missing_bundle_file() {
    let dir = TempDir::new().unwrap();
    let midi = write_seq(&dir, "in.mid", &ten_second_piece());
    let grids = dir.path().join("grids");
    assert!(hrpiano(&["encode", s(&midi), "--out", s(&grids)]).status.success());
    std::fs::remove_file(grids.join(grid_io::NOTE_OFFSET_FILE)).unwrap();
    let res = hrpiano(&["decode", s(&grids), "--out", s(&dir.path().join("x.mid"))]);
    assert!(!res.status.success());
    assert!(stderr(&res).contains(grid_io::NOTE_OFFSET_FILE), "{}", stderr(&res));
}

#[test]
fn invalid_flags_write_nothing() {
    let dir = TempDir::new().unwrap();
    let midi = write_seq(&dir, "in.mid", &ten_second_piece());
    let grids = dir.path().join("grids");
    assert!(hrpiano(&["encode", s(&midi), "--out", s(&grids)]).status.success());
    let out = dir.path().join("never.mid");
    let res = hrpiano(&["decode", s(&grids), "--out", s(&out), "--threshold", "1.5"]);
    assert!(!res.status.success());
    assert!(!out.exists());

    let bad_grids = dir.path().join("never");
    assert!(!hrpiano(&["encode", s(&midi), "--out", s(&bad_grids), "--hop", "0.01"]).status.success());
    assert!(!hrpiano(&["encode", s(&midi), "--out", s(&bad_grids), "--j", "0"]).status.success());
    assert!(!hrpiano(&["encode", s(&midi), "--out", s(&bad_grids), "--hop", "0ms"]).status.success());
    assert!(!bad_grids.exists());
}

#[test]
fn eval_counts_spurious_note() {
    let dir = TempDir::new().unwrap();
    let reference = ten_second_piece();
    let mut notes = reference.notes().to_vec();
    notes.push(NoteEvent::new(90, 7.0, 7.5, 80).unwrap());
    let estimate = NoteSequence::new(notes, reference.pedals().to_vec(), 10.0).unwrap();
    let r = write_seq(&dir, "ref.mid", &reference);
    let e = write_seq(&dir, "est.mid", &estimate);
    let csv = dir.path().join("metrics.csv");
    let res = hrpiano(&["eval", s(&r), s(&e), "--csv", s(&csv)]);
    assert!(res.status.success(), "{}", stderr(&res));
    let text = stdout(&res);
    let note_line = text.lines().find(|l| l.starts_with("Note ")).unwrap();
    // 5 of 6 estimates correct
    assert!(note_line.contains("P  83.33%") && note_line.contains("R 100.00%"), "{note_line}");
    assert!(text.contains("Pedal Event w/ offset"));
    let table = std::fs::read_to_string(&csv).unwrap();
    assert!(table.starts_with("group,precision,recall,f1\nFrame,"));
    assert!(table.contains("\nNote,0.8333333333333334,1,0.9090909090909091\n"), "{table}");
}

#[test]
fn eval_sweep_requires_units() {
    let dir = TempDir::new().unwrap();
    let r = write_seq(&dir, "ref.mid", &ten_second_piece());
    let res = hrpiano(&["eval", s(&r), s(&r), "--sweep-onset", "2ms,5ms,10ms,20ms,50ms,100ms"]);
    assert!(res.status.success(), "{}", stderr(&res));
    assert_eq!(stdout(&res).lines().count(), 6);
    let res = hrpiano(&["eval", s(&r), s(&r), "--sweep-onset", "0.002,0.005"]);
    assert!(!res.status.success());
    assert!(stderr(&res).contains("no unit"), "{}", stderr(&res));
}

#[test]
fn roundtrip_reports_exact_recovery() {
    let dir = TempDir::new().unwrap();
    let midi = write_seq(&dir, "in.mid", &ten_second_piece());
    let res = hrpiano(&["roundtrip", s(&midi)]);
    assert!(res.status.success(), "{}", stderr(&res));
    let text = stdout(&res);
    assert!(text.contains("Note F1: 100.00%"), "{text}");
    let err: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("max onset error: "))
        .and_then(|v| v.trim_end_matches(" ms").parse().ok())
        .unwrap();
    assert!(err < 0.001);
}

#[test]
fn noisy_commands_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let midi = write_seq(&dir, "in.mid", &ten_second_piece());
    let a = hrpiano(&["roundtrip", s(&midi), "--noise", "50ms", "--seed", "3"]);
    let b = hrpiano(&["roundtrip", s(&midi), "--noise", "50ms", "--seed", "3"]);
    assert!(a.status.success());
    assert_eq!(stdout(&a), stdout(&b));

    let (p, q) = (dir.path().join("p.mid"), dir.path().join("q.mid"));
    assert!(hrpiano(&["perturb", s(&midi), "--out", s(&p), "--noise", "20ms", "--seed", "9"]).status.success());
    assert!(hrpiano(&["perturb", s(&midi), "--out", s(&q), "--noise", "20ms", "--seed", "9"]).status.success());
    assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&q).unwrap());
}

#[test]
fn sweeps() {
    let dir = TempDir::new().unwrap();
    let r = write_seq(&dir, "ref.mid", &ten_second_piece());
    let res = hrpiano(&["sweep", "onset", s(&r), s(&r)]);
    assert!(res.status.success());
    assert_eq!(stdout(&res).lines().count(), 6);
    let csv = dir.path().join("offset.csv");
    assert!(hrpiano(&["sweep", "offset", s(&r), s(&r), "--csv", s(&csv)]).status.success());
    assert!(std::fs::read_to_string(&csv).unwrap().starts_with("tolerance,precision,recall,f1\n0.01,1,1,1\n"));

    let csv = dir.path().join("noise.csv");
    let res = hrpiano(&["sweep", "noise", "--trials", "50", "--csv", s(&csv)]);
    assert!(res.status.success(), "{}", stderr(&res));
    assert!(stdout(&res).contains("triangular") && stdout(&res).contains("rectangular"));
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 101);
}

#[test]
fn unreadable_midi_is_reported() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.mid");
    std::fs::write(&bad, b"RIFF1234").unwrap();
    let res = hrpiano(&["roundtrip", s(&bad)]);
    assert!(!res.status.success());
    assert!(stderr(&res).contains("bad.mid"), "{}", stderr(&res));
}
