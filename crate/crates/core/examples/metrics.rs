//! Score two hand-made predictions against ground truth.

use frameseg::data::VideoSample;
use frameseg::metrics::{evaluate, PredictionRecord};
use frameseg::MomentSpan;

fn sample(qid: u64, window: (f64, f64), saliency: Vec<Vec<u8>>) -> frameseg::Result<VideoSample> {
    Ok(VideoSample {
        qid,
        vid: None,
        query: format!("query {qid}"),
        duration: 8.0,
        gt_spans: vec![MomentSpan::new(window.0, window.1)?],
        gt_clip_saliency: Some(saliency),
        features: None,
    })
}

fn main() -> frameseg::Result<()> {
    let gt = vec![
        sample(1, (0.0, 4.0), vec![vec![4, 4, 2], vec![4, 2, 2], vec![0, 0, 0], vec![0, 0, 0]])?,
        sample(2, (4.0, 8.0), vec![vec![0, 0, 0], vec![0, 0, 0], vec![4, 4, 4], vec![1, 1, 1]])?,
    ];
    let preds = vec![
        PredictionRecord {
            qid: 1,
            pred_spans: vec![MomentSpan::scored(0.0, 4.0, 0.9)?],
            pred_clip_scores: vec![0.9, 0.1, 0.5, 0.2],
        },
        PredictionRecord {
            qid: 2,
            pred_spans: vec![MomentSpan::scored(0.0, 4.0, 0.9)?, MomentSpan::scored(4.0, 8.0, 0.8)?],
            pred_clip_scores: vec![0.1, 0.2, 0.3, 0.9],
        },
    ];
    let (report, per_query) = evaluate(&preds, &gt)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    for q in per_query {
        println!("{}", serde_json::to_string(&q)?);
    }
    Ok(())
}
