use std::ffi::{c_char, CStr, CString};
use std::ptr;

use cqa_ffi::*;

#[path = "../../core/tests/common/mod.rs"]
mod common;

fn last_error() -> String {
    let n = unsafe { cqa_last_error_message(ptr::null_mut(), 0) };
    let mut buf = vec![0 as c_char; n + 1];
    unsafe { cqa_last_error_message(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn cstr(p: &std::path::Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

#[test]
fn dump_to_scores() {
    let dir = tempfile::tempdir().unwrap();
    common::write_dump(dir.path(), &common::DumpSpec::default());
    let path = cstr(dir.path());

    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(cqa_dataset_read_dump(path.as_ptr(), &mut ds), CqaStatus::Ok, "{}", last_error());
        assert!(cqa_dataset_thread_count(ds) > 0);
        let n_inst = cqa_dataset_instance_count(ds);

        let mut all = ptr::null_mut();
        assert_eq!(cqa_features_build(ds, &mut all), CqaStatus::Ok, "{}", last_error());
        assert_eq!(cqa_features_row_count(all), n_inst);

        let groups = CString::new("S,UR").unwrap();
        let mut table = ptr::null_mut();
        assert_eq!(cqa_features_select(all, groups.as_ptr(), true, &mut table), CqaStatus::Ok);
        let n = cqa_features_row_count(table);
        let d = cqa_features_column_count(table);
        assert!(d > 0 && d < cqa_features_column_count(all));
        for j in 0..d {
            let mut buf = [0 as c_char; 64];
            let len = cqa_features_column_name(table, j, buf.as_mut_ptr(), buf.len());
            let name = CStr::from_ptr(buf.as_ptr()).to_str().unwrap();
            assert_eq!(len, name.len());
            assert!(name.starts_with("s.") || name.starts_with("ur."), "{name}");
        }
        assert_eq!(cqa_features_column_name(table, d, ptr::null_mut(), 0), 0);

        let mut labels = vec![0.0; n];
        assert_eq!(cqa_features_labels(table, labels.as_mut_ptr(), n), CqaStatus::Ok);
        assert_eq!(cqa_features_labels(table, labels.as_mut_ptr(), n - 1), CqaStatus::Dimension);

        let mut model = ptr::null_mut();
        assert_eq!(cqa_model_train(table, 50, 0.0, 3, &mut model), CqaStatus::Ok, "{}", last_error());
        assert_eq!(cqa_model_feature_count(model), d);

        let mut scores = vec![0.0; n];
        assert_eq!(cqa_model_predict_table(model, table, scores.as_mut_ptr(), n), CqaStatus::Ok);
        let mut row = vec![0.0; d];
        assert_eq!(cqa_features_row(table, 0, row.as_mut_ptr(), d), CqaStatus::Ok);
        let mut p0 = 0.0;
        assert_eq!(cqa_model_predict(model, row.as_ptr(), d, &mut p0), CqaStatus::Ok);
        assert_eq!(p0, scores[0]);
        assert_eq!(cqa_model_predict(model, row.as_ptr(), d - 1, &mut p0), CqaStatus::Dimension);
        assert_eq!(cqa_features_row(table, n, row.as_mut_ptr(), d), CqaStatus::InvalidArgument);

        let mut train_auc = 0.0;
        assert_eq!(cqa_auc(scores.as_ptr(), labels.as_ptr(), n, &mut train_auc), CqaStatus::Ok);
        assert!(train_auc > 0.8, "training AUC {train_auc}");

        // a saved model reloads to identical scores
        let mpath = cstr(&dir.path().join("model.json"));
        assert_eq!(cqa_model_save(model, mpath.as_ptr()), CqaStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(cqa_model_load(mpath.as_ptr(), &mut back), CqaStatus::Ok);
        let mut again = vec![0.0; n];
        assert_eq!(cqa_model_predict_table(back, table, again.as_mut_ptr(), n), CqaStatus::Ok);
        assert_eq!(scores, again);

        // scoring a table with other columns is refused
        assert_eq!(
            cqa_model_predict_table(back, all, again.as_mut_ptr(), n),
            CqaStatus::InvalidArgument
        );

        cqa_model_free(back);
        cqa_model_free(model);
        cqa_features_free(table);
        cqa_features_free(all);
        cqa_dataset_free(ds);
    }
}

#[test]
fn errors_map_to_status_codes() {
    let dir = tempfile::tempdir().unwrap();
    let path = cstr(dir.path());
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(cqa_dataset_read_dump(path.as_ptr(), &mut ds), CqaStatus::Io);
        assert!(ds.is_null());
        assert!(last_error().contains("Posts.xml"));

        assert_eq!(cqa_dataset_load(path.as_ptr(), &mut ds), CqaStatus::Data);
        assert!(last_error().contains("ingest"));

        assert_eq!(cqa_dataset_read_dump(ptr::null(), &mut ds), CqaStatus::NullArgument);

        let garbage = dir.path().join("model.json");
        std::fs::write(&garbage, "{}").unwrap();
        let mut m = ptr::null_mut();
        assert_eq!(cqa_model_load(cstr(&garbage).as_ptr(), &mut m), CqaStatus::Data);

        let mut t = ptr::null_mut();
        let bad = CString::new("S,X").unwrap();
        assert_eq!(cqa_features_select(ptr::null(), bad.as_ptr(), false, &mut t), CqaStatus::NullArgument);
    }
}

#[test]
fn flesch_kincaid_matches_formula() {
    let g = cqa_flesch_kincaid(12.0, 1.5);
    assert!((g - (0.39 * 12.0 + 11.8 * 1.5 - 15.59)).abs() < 1e-12);
}
