# Evaluation suite for the Kac walk laboratory
