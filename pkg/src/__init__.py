# Kac walk numerical laboratory
