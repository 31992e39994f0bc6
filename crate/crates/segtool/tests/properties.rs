//! Property tests for the corpus, noise and resegmentation invariants.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use segtool::corpus::bpe::{encode_instance, train_subwords_from_words};
use segtool::corpus::{
    chunk_document, default_punct_set, parse_subtitles, CorpusPrepConfig, Instance,
    SubtitleDocument,
};
use segtool::noise::{synthesize_gamma, NoiseMode, NoiseParams};
use segtool::resegment::{
    correct_to_transcript, emit_segments, read_transcripts, AsrToken, EchoPredictor,
    OutputFormat, Utterance,
};

fn word_strategy() -> impl Strategy<Value = String> {
    "[a-e]{1,6}"
}

fn doc_strategy() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(word_strategy(), 0..60)
}

proptest! {
    #[test]
    fn parse_never_emits_punctuation(line in "[a-c!?.() :-]{0,80}") {
        let doc = SubtitleDocument::new("d", vec![line]);
        let punct = default_punct_set();
        let (tokens, labels) = parse_subtitles(&doc, &punct);
        prop_assert_eq!(tokens.len(), labels.len());
        for tok in &tokens {
            prop_assert!(!tok.is_empty());
            // '-' may survive word-internally; everything else may not.
            prop_assert!(!tok.chars().any(|c| c != '-' && punct.contains(&c)));
        }
    }

    #[test]
    fn chunking_partitions_the_stream(words in doc_strategy(), seed in any::<u64>()) {
        let labels: Vec<u8> = words.iter().enumerate().map(|(i, _)| (i % 3 == 0) as u8).collect();
        let cfg = CorpusPrepConfig { min_len: 1, max_len: 10, ..CorpusPrepConfig::default() };
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let instances = chunk_document("d", &words, &labels, &cfg, &mut rng);

        let rebuilt_tokens: Vec<String> = instances.iter().flat_map(|i| i.tokens.clone()).collect();
        let rebuilt_labels: Vec<u8> = instances.iter().flat_map(|i| i.labels.clone()).collect();
        prop_assert_eq!(rebuilt_tokens, words);
        prop_assert_eq!(rebuilt_labels, labels);
        for (k, inst) in instances.iter().enumerate() {
            prop_assert_eq!(inst.index, k);
            prop_assert!(!inst.tokens.is_empty());
            prop_assert!(inst.tokens.len() <= cfg.max_len);
        }
    }

    #[test]
    fn subword_encoding_roundtrips_and_conserves_boundaries(
        words in prop::collection::vec(word_strategy(), 1..40),
        merges in 0usize..30,
    ) {
        let model = train_subwords_from_words(words.iter().map(String::as_str), merges).unwrap();
        for word in &words {
            let pieces = model.encode_word(word);
            prop_assert_eq!(model.decode_word(&pieces), word.clone());
        }

        let labels: Vec<u8> = words.iter().enumerate().map(|(i, _)| (i % 2) as u8).collect();
        let inst = Instance {
            doc_id: "d".into(),
            index: 0,
            tokens: words.clone(),
            gamma: Some(labels.clone()),
            labels: labels.clone(),
        };
        let encoded = encode_instance(&inst, &model);
        prop_assert_eq!(encoded.tokens.len(), encoded.labels.len());
        let before: u32 = inst.labels.iter().map(|&l| l as u32).sum();
        let after: u32 = encoded.labels.iter().map(|&l| l as u32).sum();
        prop_assert_eq!(before, after);
        let decoded = model.decode(&encoded.tokens);
        prop_assert_eq!(decoded, words);
    }

    #[test]
    fn gamma_always_aligns_with_labels(
        labels in prop::collection::vec(0u8..=1, 1..200),
        under in 0.0f64..=1.0,
        over in 0.0f64..=1.0,
        seed in any::<u64>(),
    ) {
        let params = NoiseParams { under_rate: under, over_rate: over, mode: NoiseMode::Both, seed };
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let gamma = synthesize_gamma(&labels, &params, &mut rng);
        prop_assert_eq!(gamma.len(), labels.len());
        prop_assert!(gamma.iter().all(|&g| g <= 1));
    }

    #[test]
    fn echo_correction_conserves_tokens(
        utt_sizes in prop::collection::vec(1usize..5, 1..5),
        seed in any::<u64>(),
    ) {
        let mut clock = 0.0;
        let mut counter = seed % 7;
        let utts: Vec<Utterance> = utt_sizes.iter().map(|&n| {
            let tokens: Vec<AsrToken> = (0..n).map(|_| {
                clock += 1.0;
                counter += 1;
                AsrToken { text: format!("w{counter}"), start: clock, duration: 0.5 }
            }).collect();
            Utterance { doc_id: "d".into(), channel: 0, tokens }
        }).collect();

        let transcript = correct_to_transcript(&utts, &EchoPredictor).unwrap();
        let emitted: Vec<String> = transcript.segments.iter()
            .flat_map(|s| s.tokens.clone())
            .collect();
        let original: Vec<String> = utts.iter()
            .flat_map(|u| u.tokens.iter().map(|t| t.text.clone()))
            .collect();
        prop_assert_eq!(emitted, original);
        // Echoing gamma reproduces the acoustic segmentation: one segment
        // per utterance.
        prop_assert_eq!(transcript.segments.len(), utts.len());
        for s in &transcript.segments {
            prop_assert!(!s.tokens.is_empty());
        }

        let bytes = emit_segments(&transcript, OutputFormat::Jsonl).unwrap();
        let back = read_transcripts(&bytes[..]).unwrap();
        prop_assert_eq!(back, vec![transcript]);
    }
}
