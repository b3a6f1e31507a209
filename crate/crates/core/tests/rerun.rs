mod common;

use forge_core::pipeline::{run_pipeline, run_stages, PipelineError, Stage};

#[tokio::test]
async fn reruns_reproduce_every_stage_checksum() {
    let server = common::serve(&common::minisite(), None).await;
    let work = tempfile::tempdir().unwrap();
    let manifest = common::project_manifest(&server, work.path());
    let first = run_pipeline(&manifest, None).await.unwrap();

    let again = run_pipeline(&manifest, Some(Stage::Prune)).await.unwrap();
    assert!(again.stage(Stage::Crawl).unwrap().reused);
    assert!(!again.stage(Stage::Prune).unwrap().reused);
    assert_eq!(first.checksums(), again.checksums());

    let other = tempfile::tempdir().unwrap();
    let fresh = run_pipeline(&common::project_manifest(&server, other.path()), None).await.unwrap();
    assert_eq!(first.checksums(), fresh.checksums());
}

#[tokio::test]
async fn tampered_artifact_blocks_a_partial_rerun() {
    let server = common::serve(&common::minisite(), None).await;
    let work = tempfile::tempdir().unwrap();
    let manifest = common::project_manifest(&server, work.path());
    run_pipeline(&manifest, None).await.unwrap();

    let pairs = manifest.stage_dir(Stage::Pair).join(forge_core::pipeline::PAIRS_FILE);
    std::fs::write(&pairs, "[]").unwrap();
    let err = run_pipeline(&manifest, Some(Stage::Align)).await.unwrap_err();
    assert!(matches!(err, PipelineError::ChangedArtifact { stage: Stage::Pair, .. }), "{err}");

    std::fs::remove_dir_all(manifest.stage_dir(Stage::Pair)).unwrap();
    let err = run_pipeline(&manifest, Some(Stage::Align)).await.unwrap_err();
    assert!(err.to_string().contains("pair"), "{err}");
}

#[tokio::test]
async fn stage_ranges_compose_into_a_full_run() {
    let server = common::serve(&common::minisite(), None).await;
    let work = tempfile::tempdir().unwrap();
    let manifest = common::project_manifest(&server, work.path());
    let full = run_pipeline(&manifest, None).await.unwrap();

    let head = run_stages(&manifest, None, Some(Stage::Pair)).await.unwrap();
    assert_eq!(head.stages.len(), 5);
    assert!(head.stats.is_none());
    assert!(!manifest.stage_dir(Stage::Extract).exists(), "downstream artifacts are dropped");

    let tail = run_stages(&manifest, Some(Stage::Extract), None).await.unwrap();
    assert_eq!(tail.checksums(), full.checksums());
    assert_eq!(tail.stats, full.stats);
}
