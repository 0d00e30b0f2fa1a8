//! Writes a synthetic corpus to disk as a manifest plus feature CSVs and
//! loads it back.

use mmsb::corpus::{generate_synthetic, load_corpus, write_corpus, SynthSpec};

fn main() -> mmsb::Result<()> {
    let spec = SynthSpec {
        name: "roundtrip".into(),
        videos: 6,
        speakers: 3,
        ..Default::default()
    };
    let corpus = generate_synthetic(&spec, 42)?;
    let dir = std::env::temp_dir().join("mmsb-manifest-roundtrip");
    let _ = std::fs::remove_dir_all(&dir);
    let manifest = write_corpus(&corpus, &dir)?;
    println!("wrote {}", manifest.display());

    let loaded = load_corpus(&manifest)?;
    println!(
        "loaded '{}': {} videos, {} utterances, speakers {:?}, dims {:?}",
        loaded.name(),
        loaded.num_videos(),
        loaded.num_utterances(),
        loaded.speakers(),
        loaded.dims()
    );
    let same = corpus
        .utterances()
        .zip(loaded.utterances())
        .all(|(a, b)| a.label == b.label && a.audio == b.audio && corpus.token_strings(a) == loaded.token_strings(b));
    println!("labels, features and tokens preserved: {same}");
    Ok(())
}
