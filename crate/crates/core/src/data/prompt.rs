use crate::error::{Error, Result};

/// System prompt used for both training and evaluation.
pub const SYSTEM_PROMPT: &str = "You are a smart video retrieval assistant. \n\
You will receive a video and a human activity query given by the user. \n\
Return the frames that matches the activity query. \n\
Follow the output format given by the user.";

/// Placeholder replaced by one frame's visual tokens.
pub const IMAGE_PLACEHOLDER: &str = "<image>";

/// User prompt asking for an `f`-character mask for `query`.
///
/// Every count in the template follows `f`, including the singular case
/// ("exactly 1 characters long"). No trailing newline.
pub fn build_prompt(query: &str, f: usize) -> Result<String> {
    if query.trim().is_empty() {
        return Err(Error::invalid("query is empty"));
    }
    if f == 0 {
        return Err(Error::invalid("frame count must be >= 1"));
    }
    let mut s = format!(
        "You are given {f} frames sampled from a video, ordered and separated by newline characters, indexed from 0 to {}:\n",
        f - 1
    );
    for k in 0..f {
        s.push_str(&format!("Frame {k}: {IMAGE_PLACEHOLDER}\n"));
    }
    s.push_str(
        "\n**Your task**: given an activity, analyze the video frames to identify which ones contain the specified activity.\n\n",
    );
    s.push_str(&format!(
        "**Output format**: provide a {f} character binary segmentation mask, specifically:\n"
    ));
    s.push_str("- '1' means the frame at that position likely matches to the activity.\n");
    s.push_str("- '0' means the frame at that position likely does not match to the activity.\n");
    s.push_str(&format!(
        "- Your output must be exactly {f} characters long and contain only '1's and '0's, with no spaces or other delimiters and no explanations.\n\n"
    ));
    s.push_str(&format!("**Activity**: {query}\n\n"));
    s.push_str("**Question**: Which frames contains the activity?");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn placeholder_count_and_ranges() {
        for f in 1..30 {
            let p = build_prompt("a dog runs", f).unwrap();
            assert_eq!(p.matches(IMAGE_PLACEHOLDER).count(), f);
            assert!(p.contains(&format!("indexed from 0 to {}:", f - 1)));
            assert!(p.contains(&format!("exactly {f} characters long")));
            assert!(!p.ends_with('\n'));
        }
    }

    #[test]
    fn two_frames() {
        let p = build_prompt("x", 2).unwrap();
        assert!(p.starts_with("You are given 2 frames"));
        assert!(p.contains("Frame 0: <image>\nFrame 1: <image>\n\n"));
        assert!(p.contains("provide a 2 character binary"));
    }

    #[test]
    fn rejects_empty() {
        assert!(build_prompt("  ", 3).is_err());
        assert!(build_prompt("q", 0).is_err());
    }

    #[test]
    fn system_prompt_lines() {
        let lines: Vec<&str> = SYSTEM_PROMPT.split('\n').collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[..3].iter().all(|l| l.ends_with(". ")));
        assert_eq!(lines[3], "Follow the output format given by the user.");
    }
}
