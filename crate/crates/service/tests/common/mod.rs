use std::sync::Arc;

use dusk_core::calibration::default_profile;
use dusk_core::sim::Typist;
use dusk_core::{DecoderConfig, Layout, Lexicon};
use dusk_service::protocol::{ClientMessage, TouchPoint};

pub fn config() -> Arc<DecoderConfig> {
    let lexicon = Lexicon::load_path(concat!(env!("CARGO_MANIFEST_DIR"), "/../core/fixtures/lexicon_en_3k.tsv"), 3000)
        .expect("lexicon fixture");
    Arc::new(DecoderConfig {
        profile: default_profile(),
        layout: Layout::qwerty(),
        lexicon: Some(lexicon),
    })
}

/// Client messages for typing `text` as one phrase.
pub fn phrase_transcript(config: &DecoderConfig, text: &str, start_ms: f64) -> Vec<ClientMessage> {
    let pad = config.profile.pad;
    let mut typist = Typist::new(config.profile.clone(), config.layout.clone());
    typist.set_clock(start_ms);
    let mut out = vec![ClientMessage::StartPhrase { text: text.to_string() }];
    for g in typist.gestures_for_text(text) {
        let n = g.samples().len();
        for (i, s) in g.samples().iter().enumerate() {
            let p = TouchPoint {
                pointer_id: g.pointer_id,
                x: s.x / pad.width,
                y: s.y / pad.height,
                t_ms: s.t,
            };
            out.push(match i {
                0 => ClientMessage::TouchDown(p),
                i if i + 1 == n => ClientMessage::TouchUp(p),
                _ => ClientMessage::TouchMove(p),
            });
        }
    }
    out.push(ClientMessage::EndPhrase);
    out
}
