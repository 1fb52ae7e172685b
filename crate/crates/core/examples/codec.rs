//! Convert a frame mask to moments and back.
//!
//! cargo run --example codec -- 0000000000001111111111010 150

use frameseg::maskcodec::{mask_to_moments, moments_to_mask, parse_mask, render_mask, score_spans, ParseMode};
use frameseg::Timeline;

fn main() -> frameseg::Result<()> {
    let mut args = std::env::args().skip(1);
    let text = args.next().unwrap_or_else(|| "0000000000001111111111010".into());
    let duration: f64 = args.next().and_then(|d| d.parse().ok()).unwrap_or(150.0);
    let mask = parse_mask(&text, text.trim().len(), ParseMode::Lenient)?;
    let tl = Timeline::uniform(duration, mask.len())?;

    println!("frame step {:.3} s, centres {:?}", tl.step(), (0..tl.frames()).map(|i| tl.center(i)).collect::<Vec<_>>());
    let spans = mask_to_moments(&mask.bits, &tl)?;
    for s in &spans {
        println!("moment [{}, {}]", s.start, s.end);
    }
    println!("back to mask: {}", render_mask(&moments_to_mask(&spans, &tl)));

    // confidences from made-up frame probabilities
    let probs: Vec<f64> = mask.bits.iter().map(|&b| if b { 0.9 } else { 0.2 }).collect();
    for s in score_spans(&spans, &probs, &tl)? {
        println!("scored [{}, {}] {:.2}", s.start, s.end, s.confidence.unwrap_or(0.0));
    }
    Ok(())
}
