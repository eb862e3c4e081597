//! Line-level recall between two patches, and the verification bucket it
//! lands in.
//!
//!     cargo run -p softverify --example patch_recall

use softverify::patchdiff::patch_total_lines;
use softverify::{change_set, parse_unified_diff, recall, Bucket, IdentityMode};

const REFERENCE: &str = "\
--- a/pkg/strings.py
+++ b/pkg/strings.py
@@ -1,3 +1,5 @@
 def normalize(text):
-    return text.strip().lower()
+    if text is None:
+        return \"\"
+    return text.strip().casefold()
 
";

// Fixes the same bug but keeps `lower()`, and touches another file.
const CANDIDATE: &str = "\
--- a/pkg/strings.py
+++ b/pkg/strings.py
@@ -1,3 +1,5 @@
 def normalize(text):
-    return text.strip().lower()
+    if text is None:
+        return \"\"
+    return text.strip().lower()
 
--- a/pkg/stats.py
+++ b/pkg/stats.py
@@ -1,1 +1,2 @@
 import math
+import statistics
";

fn main() {
    let reference = parse_unified_diff(REFERENCE).expect("reference parses");
    let candidate = parse_unified_diff(CANDIDATE).expect("candidate parses");
    println!("reference changes {} lines, candidate {}", patch_total_lines(&reference), patch_total_lines(&candidate));

    for mode in [IdentityMode::WithPath, IdentityMode::PathAgnostic] {
        let r = recall(&change_set(&candidate, mode), &change_set(&reference, mode)).expect("non-empty reference");
        println!("{mode:?}: r = {r:.3} -> {:?}", Bucket::of(r));
    }

    // A patch always fully recalls itself.
    let own = change_set(&reference, IdentityMode::WithPath);
    println!("self recall: {}", recall(&own, &own).unwrap());
}
