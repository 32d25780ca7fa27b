use std::ffi::{c_char, CStr, CString};
use std::ptr;

use memogan_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    unsafe {
        mg_last_error(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

#[test]
fn partition_thresholds_and_index() {
    unsafe {
        let mut part = ptr::null_mut();
        assert_eq!(mg_partition_new(4, 2, 1.0, &mut part), MgStatus::Ok);
        let mut m = 0;
        assert_eq!(mg_partition_m(part, &mut m), MgStatus::Ok);
        assert_eq!(m, 16);
        let mut tau = [0.0; 3];
        assert_eq!(mg_partition_thresholds(part, tau.as_mut_ptr(), 3), MgStatus::Ok);
        assert!((tau[1] - 0.674490).abs() < 1e-6);
        let mut short = [0.0; 2];
        assert_eq!(mg_partition_thresholds(part, short.as_mut_ptr(), 2), MgStatus::DimensionMismatch);
        let z = [0.1, -2.0];
        let mut index = 0;
        assert_eq!(mg_partition_block_index(part, z.as_ptr(), 2, &mut index), MgStatus::Ok);
        assert_eq!(index, 13);
        mg_partition_free(part);
    }
}

#[test]
fn error_codes_and_messages() {
    unsafe {
        let mut part = ptr::null_mut();
        assert_eq!(mg_partition_new(0, 2, 1.0, &mut part), MgStatus::Precondition);
        assert!(part.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(mg_partition_new(4, 2, 1.0, ptr::null_mut()), MgStatus::NullPointer);
        assert!(last_error().contains("null"));
        let len = mg_last_error(ptr::null_mut(), 0);
        assert_eq!(len, last_error().len());
        let mut one = [0 as c_char; 1];
        mg_last_error(one.as_mut_ptr(), 1);
        assert_eq!(one[0], 0);
        let mut m = 0;
        assert_eq!(mg_partition_m(ptr::null(), &mut m), MgStatus::NullPointer);
        let mut gen = ptr::null_mut();
        let missing = CString::new("/nonexistent/generator").unwrap();
        assert_eq!(mg_generator_load(missing.as_ptr(), &mut gen), MgStatus::Io);
        mg_partition_free(ptr::null_mut());
        mg_generator_free(ptr::null_mut());
        mg_network_free(ptr::null_mut());
        mg_string_free(ptr::null_mut());
    }
}

#[test]
fn encode_splice_round_trip() {
    unsafe {
        let x_tilde: Vec<f64> = (0..12).map(|i| i as f64 * 0.1).collect();
        let z = [1.5, -0.25, 3.0];
        let mut x = vec![0.0; 12];
        assert_eq!(mg_splice(12, 3, 1.0, x_tilde.as_ptr(), z.as_ptr(), x.as_mut_ptr()), MgStatus::Ok);
        let mut back = [0.0; 3];
        assert_eq!(mg_encode(12, 3, 1.0, x.as_ptr(), 12, back.as_mut_ptr(), 3), MgStatus::Ok);
        assert_eq!(back, z);
        let mut enc = ptr::null_mut();
        assert_eq!(mg_encoder_network(12, 3, 1.0, &mut enc), MgStatus::Ok);
        let mut w = 0;
        assert_eq!(mg_network_nonzero_weights(enc, &mut w), MgStatus::Ok);
        assert_eq!(w, 3);
        let mut y = [0.0; 3];
        assert_eq!(mg_network_forward(enc, x.as_ptr(), 12, y.as_mut_ptr(), 3), MgStatus::Ok);
        assert_eq!(y, z);
        mg_network_free(enc);
    }
}

#[test]
fn generator_compile_forward_and_json() {
    unsafe {
        let mut gen = ptr::null_mut();
        assert_eq!(mg_generator_build(10, 2, 1.0, 3, 42, &mut gen), MgStatus::Ok);
        let mut m = 0;
        mg_generator_m(gen, &mut m);
        assert_eq!(m, 9);

        let mut net = ptr::null_mut();
        let mut report = MgCompileReport::default();
        assert_eq!(mg_compile(gen, 0.01, &mut net, &mut report), MgStatus::Ok);
        assert!(report.nonzero_weights <= report.predicted_bound);
        let (mut din, mut dout) = (0, 0);
        mg_network_dims(net, &mut din, &mut dout);
        assert_eq!((din, dout), (2, 10));

        // a seed far from every threshold is reproduced exactly
        let z = [0.05, 2.5];
        let mut reference = [0.0; 10];
        assert_eq!(mg_generator_generate(gen, z.as_ptr(), 2, reference.as_mut_ptr(), 10), MgStatus::Ok);
        let mut compiled = [0.0; 10];
        assert_eq!(mg_network_forward(net, z.as_ptr(), 2, compiled.as_mut_ptr(), 10), MgStatus::Ok);
        for (a, b) in reference.iter().zip(&compiled) {
            assert!((a - b).abs() < 1e-9);
        }

        let mut json = ptr::null_mut();
        assert_eq!(mg_network_to_json(net, &mut json), MgStatus::Ok);
        let mut again = ptr::null_mut();
        assert_eq!(mg_network_from_json(json, &mut again), MgStatus::Ok);
        let mut w = 0;
        mg_network_nonzero_weights(again, &mut w);
        assert_eq!(w, report.nonzero_weights);
        let bad = CString::new("{\"input_dim\": 2}").unwrap();
        let mut broken = ptr::null_mut();
        assert_eq!(mg_network_from_json(bad.as_ptr(), &mut broken), MgStatus::Parse);

        let dir = tempfile::tempdir().unwrap();
        let dir_c = CString::new(dir.path().to_str().unwrap()).unwrap();
        assert_eq!(mg_generator_save(gen, dir_c.as_ptr()), MgStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(mg_generator_load(dir_c.as_ptr(), &mut loaded), MgStatus::Ok);
        let mut x = [0.0; 10];
        mg_generator_generate(loaded, z.as_ptr(), 2, x.as_mut_ptr(), 10);
        assert_eq!(x, reference);

        mg_string_free(json);
        mg_network_free(again);
        mg_network_free(net);
        mg_generator_free(loaded);
        mg_generator_free(gen);
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(mg_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/memogan.h")).unwrap();
    for name in [
        "mg_partition_new",
        "mg_generator_build",
        "mg_generator_generate",
        "mg_compile",
        "mg_network_forward",
        "mg_network_to_json",
        "mg_last_error",
        "MG_STATUS_OK",
        "typedef struct MgGenerator MgGenerator",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}
