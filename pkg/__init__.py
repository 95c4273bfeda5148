# PREBench - region-aware evaluation toolkit for 4D video edits
