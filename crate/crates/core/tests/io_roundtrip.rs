mod common;

use proptest::prelude::*;
use ssnmf_core::io::{
    clip_extremes, decode_matrix, encode_matrix, parse_csv, read_any, read_matrix, write_abundance_maps,
    write_csv, write_matrix, HsiCube,
};
use ssnmf_core::{DataMatrix, Error};

/// Minimal independent P5 reader: `(width, height, maxval, pixels)`.
fn read_pgm(bytes: &[u8]) -> (usize, usize, usize, Vec<u8>) {
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        fields.push(String::from_utf8(bytes[start..pos].to_vec()).unwrap());
    }
    assert_eq!(fields[0], "P5");
    pos += 1;
    let w: usize = fields[1].parse().unwrap();
    let h: usize = fields[2].parse().unwrap();
    let maxval: usize = fields[3].parse().unwrap();
    assert_eq!(bytes.len() - pos, w * h);
    (w, h, maxval, bytes[pos..].to_vec())
}

fn finite() -> impl Strategy<Value = f64> {
    prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO
}

proptest! {
    #[test]
    fn binary_round_trip_is_bit_exact(
        (m, n, vals) in (1usize..6, 1usize..6).prop_flat_map(|(m, n)| {
            (Just(m), Just(n), prop::collection::vec(finite(), m * n))
        })
    ) {
        let x = DataMatrix::new(m, n, vals).unwrap();
        let back = decode_matrix(&encode_matrix(&x)).unwrap();
        prop_assert_eq!(back.shape(), x.shape());
        for (a, b) in back.as_slice().iter().zip(x.as_slice()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}

#[test]
fn files_round_trip_through_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = common::rng(51);
    let x = common::gaussian_matrix(&mut rng, 7, 4);

    let bin = dir.path().join("x.ssnmf");
    write_matrix(&bin, &x).unwrap();
    assert_eq!(read_matrix(&bin).unwrap(), x);
    assert_eq!(read_any(&bin).unwrap(), x);

    let csv = dir.path().join("x.csv");
    write_csv(&csv, &x).unwrap();
    assert_eq!(read_any(&csv).unwrap(), x);
}

#[test]
fn missing_file_is_an_io_error() {
    let err = read_matrix("/nonexistent/dir/x.ssnmf").unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
}

#[test]
fn csv_reports_the_offending_line() {
    assert_eq!(parse_csv("1,2\n3,4").unwrap().shape(), (2, 2));
    assert!(matches!(parse_csv("1,2\n3"), Err(Error::Parse { line: 2, .. })));
    assert!(matches!(parse_csv("1,2\nx,4"), Err(Error::Parse { line: 2, .. })));
    assert_eq!(parse_csv("1e-3").unwrap().get(0, 0), 0.001);
}

fn spiked_cube() -> HsiCube {
    let (bands, width, height) = (3, 5, 2);
    let mut data = DataMatrix::zeros(bands, width * height).into_vec();
    for (band, col) in [(0, 1), (1, 6), (2, 8)] {
        data[col * bands + band] = 10.0 + band as f64;
    }
    HsiCube::new(DataMatrix::new(bands, width * height, data).unwrap(), width, height).unwrap()
}

#[test]
fn planted_spikes_are_removed_exactly() {
    let (clean, removed) = clip_extremes(&spiked_cube(), 1).unwrap();
    assert_eq!(removed, vec![1, 6, 8]);
    assert!(clean.data().as_slice().iter().all(|&v| v == 0.0));
}

#[test]
fn second_clip_only_takes_tie_forced_zero_columns() {
    let (once, _) = clip_extremes(&spiked_cube(), 1).unwrap();
    let (_, removed) = clip_extremes(&once, 1).unwrap();
    for j in removed {
        assert!(once.data().col(j).iter().all(|&v| v == 0.0));
    }
}

#[test]
fn clipping_removes_at_most_k_per_band() {
    let mut rng = common::rng(52);
    let x = common::uniform_matrix(&mut rng, 6, 40);
    let cube = HsiCube::new(x, 8, 5).unwrap();
    for k in [1, 3, 10] {
        let (_, removed) = clip_extremes(&cube, k).unwrap();
        assert!(removed.len() <= k * 6 && removed.len() >= k);
    }
}

#[test]
fn maps_decode_with_reference_reader_and_ignore_row_scale() {
    let dir = tempfile::tempdir().unwrap();
    let h = DataMatrix::from_rows(&[[0.0, 2.0, 1.0, 0.5, 0.25, 1.5], [0.0; 6]]).unwrap();
    let paths = write_abundance_maps(&h, 3, 2, dir.path().join("a")).unwrap();
    assert_eq!(paths.len(), 2);
    assert!(paths[0].ends_with("endmember_01.pgm"));
    let (w, hh, maxval, px) = read_pgm(&std::fs::read(&paths[0]).unwrap());
    assert_eq!((w, hh, maxval), (3, 2, 255));
    assert_eq!(px, vec![0, 255, 128, 64, 32, 191]);
    let (_, _, _, zeros) = read_pgm(&std::fs::read(&paths[1]).unwrap());
    assert_eq!(zeros, vec![0; 6]);

    let scaled = DataMatrix::from_rows(&[[0.0, 14.0, 7.0, 3.5, 1.75, 10.5], [0.0; 6]]).unwrap();
    let again = write_abundance_maps(&scaled, 3, 2, dir.path().join("b")).unwrap();
    assert_eq!(
        std::fs::read(&paths[0]).unwrap(),
        std::fs::read(&again[0]).unwrap()
    );
}
