use std::ffi::{CStr, CString};
use std::ptr;

use kgforge_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn take(p: *mut std::ffi::c_char) -> serde_json::Value {
    let v = serde_json::from_str(CStr::from_ptr(p).to_str().unwrap()).unwrap();
    kgf_string_free(p);
    v
}

unsafe fn last_error() -> String {
    CStr::from_ptr(kgf_last_error_message()).to_string_lossy().into_owned()
}

#[test]
fn session_flow_through_the_abi() {
    unsafe {
        let dir = tempfile::tempdir().unwrap();
        let graph = dir.path().join("g.nt");
        std::fs::write(
            &graph,
            "<edukg://concept/steam_engine> <http://www.w3.org/2000/01/rdf-schema#label> \"steam engine\" .\n",
        )
        .unwrap();
        let toml = format!("[paths]\ngraph = {:?}\n", graph.to_str().unwrap());
        let mut engine = ptr::null_mut();
        assert_eq!(kgf_engine_open(c(&toml).as_ptr(), &mut engine), KgfStatus::Ok);

        let mut out = ptr::null_mut();
        assert_eq!(kgf_search(engine, c("steam engin").as_ptr(), 0, &mut out), KgfStatus::Ok);
        let hits = take(out);
        assert_eq!(hits["hits"][0]["iri"], "edukg://concept/steam_engine");

        let req = c(r#"{"sessionId":"s","docId":"d","text":"Watt built a steam engine."}"#);
        assert_eq!(kgf_session_create(engine, req.as_ptr(), &mut out), KgfStatus::Ok);
        let s = take(out);
        let cid = s["entityCandidates"][0]["id"].as_str().unwrap().to_owned();

        assert_eq!(kgf_session_advance(engine, c("s").as_ptr(), &mut out), KgfStatus::Conflict);
        assert!(last_error().contains("stage"));
        assert_eq!(kgf_session_advance(engine, c("nope").as_ptr(), &mut out), KgfStatus::NotFound);

        let label = c(&format!(r#"{{"candidateId":"{cid}","verdict":"accept"}}"#));
        assert_eq!(kgf_session_label(engine, c("s").as_ptr(), label.as_ptr(), &mut out), KgfStatus::Ok);
        let s = take(out);
        assert!((s["entityCandidates"][0]["confidence"].as_f64().unwrap() - 0.6).abs() < 1e-12);

        assert_eq!(kgf_session_commit(engine, c("s").as_ptr(), &mut out), KgfStatus::Ok);
        let committed = take(out);
        let mut rev = 0;
        assert_eq!(kgf_revision(engine, &mut rev), KgfStatus::Ok);
        assert_eq!(committed["revision"], rev);
        assert_eq!(rev, 1);

        assert_eq!(kgf_export_ntriples(engine, &mut out), KgfStatus::Ok);
        CStr::from_ptr(out).to_str().unwrap();
        kgf_string_free(out);
        kgf_engine_free(engine);
        assert!(dir.path().join("g.meta.json").exists());
    }
}

#[test]
fn argument_errors() {
    unsafe {
        let mut engine = ptr::null_mut();
        assert_eq!(kgf_engine_open(c("theta = 7.0").as_ptr(), &mut engine), KgfStatus::Config);
        assert!(engine.is_null());
        assert_eq!(kgf_engine_open(ptr::null(), ptr::null_mut()), KgfStatus::NullArgument);
        assert_eq!(kgf_engine_open(ptr::null(), &mut engine), KgfStatus::Ok);
        assert!(kgf_last_error_message().is_null());

        let mut out = ptr::null_mut();
        assert_eq!(kgf_search(ptr::null(), c("x").as_ptr(), 1, &mut out), KgfStatus::NullArgument);
        assert_eq!(kgf_search(engine, ptr::null(), 1, &mut out), KgfStatus::NullArgument);
        let bad = [0xffu8, 0];
        assert_eq!(kgf_search(engine, bad.as_ptr().cast(), 1, &mut out), KgfStatus::InvalidUtf8);
        assert_eq!(kgf_search(engine, c(" ").as_ptr(), 1, &mut out), KgfStatus::BadRequest);
        assert_eq!(kgf_link(engine, c("{").as_ptr(), 0, &mut out), KgfStatus::BadRequest);
        assert_eq!(kgf_answer(engine, c("hello there").as_ptr(), &mut out), KgfStatus::BadRequest);

        let mut p = 0.0;
        assert_eq!(kgf_confidence(0.5, 1, 2, 0.1, 0, &mut p), KgfStatus::Ok);
        assert_eq!(p, 0.5 + 0.1 * 3.0);
        assert_eq!(CStr::from_ptr(kgf_version()).to_str().unwrap(), env!("CARGO_PKG_VERSION"));
        kgf_string_free(ptr::null_mut());
        kgf_engine_free(engine);
    }
}
