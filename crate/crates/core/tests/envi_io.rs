use std::fs;

use hsi_core::envi::{read_envi, write_envi_with, DataType, EnviHeader, WriteOptions};
use hsi_core::{HsiError, HyperCube, Interleave, MetadataRecord, Quantity, SpectralAxis};
use hsi_testkit::representable_samples;
use proptest::prelude::*;

fn cube_for(dt: DataType, h: usize, w: usize, l: usize, seed: u64) -> HyperCube {
    let values = representable_samples(dt.code(), h * w * l, seed);
    let axis = SpectralAxis::linspace(420.0, 2450.0, l).unwrap();
    let metadata = MetadataRecord {
        sensor_name: "bench".into(),
        description: "round trip".into(),
        ..MetadataRecord::default()
    };
    HyperCube::new(h, w, l, values, Quantity::Radiance, axis, metadata).unwrap()
}

#[test]
fn every_layout_and_type_round_trips_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    for (i, dt) in DataType::ALL.into_iter().enumerate() {
        for il in Interleave::ALL {
            let cube = cube_for(dt, 3, 5, 7, i as u64);
            let opts = WriteOptions {
                interleave: il,
                data_type: dt,
                ..WriteOptions::default()
            };
            let paths = write_envi_with(&cube, dir.path().join("c"), &opts).unwrap();
            let back = read_envi(&paths.header).unwrap();
            assert_eq!((back.height(), back.width(), back.bands()), (3, 5, 7));
            assert!(cube
                .values()
                .iter()
                .zip(back.values())
                .all(|(a, b)| a.to_bits() == b.to_bits()));
            assert_eq!(back.axis(), cube.axis());
            assert_eq!(back.quantity, Quantity::Radiance);
            assert_eq!(back.metadata.sensor_name, "bench");
            assert_eq!(back.metadata.interleave, il);
        }
    }
}

#[test]
fn truncated_binary_reports_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let cube = cube_for(DataType::F32, 2, 2, 3, 9);
    let paths = write_envi_with(&cube, dir.path().join("t"), &WriteOptions::default()).unwrap();
    let bytes = fs::read(&paths.binary).unwrap();
    fs::write(&paths.binary, &bytes[..bytes.len() - 4]).unwrap();
    match read_envi(&paths.header) {
        Err(HsiError::SizeMismatch { expected, actual }) => {
            assert_eq!((expected, actual), (48, 44))
        }
        other => panic!("expected SizeMismatch, got {other:?}"),
    }
}

#[test]
fn missing_binary_and_bad_type() {
    let dir = tempfile::tempdir().unwrap();
    let hdr = dir.path().join("lonely.hdr");
    fs::write(
        &hdr,
        "ENVI\nsamples = 1\nlines = 1\nbands = 1\ndata type = 4\ninterleave = bsq\n",
    )
    .unwrap();
    assert!(matches!(read_envi(&hdr), Err(HsiError::MissingBinary(_))));
    let err = EnviHeader::parse(
        "ENVI\nsamples = 1\nlines = 1\nbands = 1\ndata type = 6\ninterleave = bsq\n",
    )
    .unwrap_err();
    assert!(matches!(err, HsiError::UnsupportedDataType(6)));
}

#[test]
fn malformed_line_names_its_number() {
    let err = EnviHeader::parse("ENVI\nsamples = 2\nthis line is junk\n").unwrap_err();
    match err {
        HsiError::HeaderParse { line, .. } => assert_eq!(line, 3),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn big_endian_with_offset_and_micrometers() {
    let dir = tempfile::tempdir().unwrap();
    let hdr = dir.path().join("be.hdr");
    fs::write(
        &hdr,
        "ENVI\nsamples = 2\nlines = 1\nbands = 2\nheader offset = 3\ndata type = 2\ninterleave = bip\n\
         byte order = 1\nwavelength units = Micrometers\nwavelength = {0.5,\n 1.5}\n",
    )
    .unwrap();
    let mut bytes = vec![0xAA; 3];
    for v in [-2i16, 7, 300, -32768] {
        bytes.extend_from_slice(&v.to_be_bytes());
    }
    fs::write(dir.path().join("be.img"), bytes).unwrap();
    let c = read_envi(&hdr).unwrap();
    assert_eq!(c.values(), &[-2.0, 7.0, 300.0, -32768.0]);
    assert_eq!(c.axis().wavelengths(), &[500.0, 1500.0]);
    assert_eq!(c.quantity, Quantity::DigitalNumber);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_shapes_round_trip(h in 1usize..5, w in 1usize..5, l in 1usize..6, seed in any::<u64>(), t in 0usize..5, i in 0usize..3) {
        let dir = tempfile::tempdir().unwrap();
        let dt = DataType::ALL[t];
        let cube = cube_for(dt, h, w, l, seed);
        let opts = WriteOptions { interleave: Interleave::ALL[i], data_type: dt, ..WriteOptions::default() };
        let paths = write_envi_with(&cube, dir.path().join("p"), &opts).unwrap();
        let back = read_envi(&paths.header).unwrap();
        prop_assert_eq!(back.values(), cube.values());
    }
}
