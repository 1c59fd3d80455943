# API Routes Package 