use std::path::PathBuf;
use std::process::Command;

fn header() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/chansbgm.h")
}

#[test]
fn header_declares_every_export() {
    let text = std::fs::read_to_string(header()).unwrap();
    for name in [
        "chansbgm_last_error",
        "chansbgm_version",
        "chansbgm_dictionary_simo",
        "chansbgm_dictionary_ofdm",
        "chansbgm_dictionary_free",
        "chansbgm_model_new",
        "chansbgm_model_load",
        "chansbgm_model_free",
        "chansbgm_fit",
        "chansbgm_fit_options_default",
        "chansbgm_posterior_mean",
        "chansbgm_generate",
        "chansbgm_batch_render",
        "chansbgm_batch_params",
        "chansbgm_batch_free",
    ] {
        assert!(text.contains(&format!("{name}(")), "{name} missing from header");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = which_cc() else { return };
    let status = Command::new(cc)
        .args(["-fsyntax-only", "-std=c99", "-Wall", "-Werror", "-x", "c"])
        .arg(header())
        .status()
        .unwrap();
    assert!(status.success());
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok())
        .ok_or(())
}
